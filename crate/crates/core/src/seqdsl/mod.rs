//! Pulse-sequence DSL: lexer, recursive-descent parser, compiler to timed
//! segments, and built-in presets.
//!
//! ```text
//! param eps = 0;
//! repeat 1 {
//!     wait tau/2; pulse pi+eps x; wait tau; pulse pi+eps x; wait tau/2;
//! }
//! ```

mod compile;
mod lexer;
mod parser;
mod presets;

use std::fmt;

use thiserror::Error;

pub use compile::{compile, Bindings, PulseDrive, SegmentList, TimingConvention};
pub use parser::parse;
pub use presets::Preset;

use crate::spinsys::Resolved;

/// Names bound by the compiler itself. `tau` is the pulse spacing, `tp` the
/// pulse width.
pub const RESERVED: [&str; 3] = ["pi", "tau", "tp"];

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DslError {
    #[error("syntax error at {span}: found `{found}`, expected {expected}")]
    Syntax {
        span: Span,
        found: String,
        expected: String,
    },
    #[error("unbound parameter `{name}`{}", fmt_at(.span))]
    UnboundParameter { name: String, span: Option<Span> },
    #[error("negative duration {value:e} s at {span} (pulse spacing must exceed the pulse width)")]
    NegativeDuration { span: Span, value: f64 },
    #[error("invalid value at {span}: {message}")]
    InvalidValue { span: Span, message: String },
    #[error("sequence period is empty")]
    EmptyPeriod,
    #[error("invalid preset: {0}")]
    InvalidPreset(String),
}

fn fmt_at(span: &Option<Span>) -> String {
    match span {
        Some(s) => format!(" at {s}"),
        None => String::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    /// Evaluates with `lookup` resolving names; the first unresolved name is
    /// returned as the error.
    pub fn eval(&self, lookup: &dyn Fn(&str) -> Option<f64>) -> Result<f64, String> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(name) => lookup(name).ok_or_else(|| name.clone())?,
            Expr::Neg(e) => -e.eval(lookup)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(lookup)?, b.eval(lookup)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
        })
    }

    pub fn collect_vars(&self, out: &mut Vec<String>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(name) => {
                if !out.contains(name) {
                    out.push(name.clone());
                }
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn from_name(s: &str) -> Option<Axis> {
        match s {
            "x" => Some(Axis::X),
            "y" => Some(Axis::Y),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
        }
    }

    /// Carrier phase φ in radians.
    pub fn phase(self) -> f64 {
        match self {
            Axis::X => 0.0,
            Axis::Y => std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Wait {
        duration: Expr,
        span: Span,
    },
    Pulse {
        angle: Expr,
        axis: Axis,
        span: Span,
    },
    Repeat {
        count: u32,
        body: Vec<Stmt>,
        span: Span,
    },
}

impl Stmt {
    fn strip(&self) -> Stmt {
        let zero = Span::default();
        match self {
            Stmt::Wait { duration, .. } => Stmt::Wait {
                duration: duration.clone(),
                span: zero,
            },
            Stmt::Pulse { angle, axis, .. } => Stmt::Pulse {
                angle: angle.clone(),
                axis: *axis,
                span: zero,
            },
            Stmt::Repeat { count, body, .. } => Stmt::Repeat {
                count: *count,
                body: body.iter().map(Stmt::strip).collect(),
                span: zero,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub default: Option<Expr>,
    pub span: Span,
}

/// A parsed program: parameter declarations plus the statements of one
/// period. `Display` pretty-prints fully parenthesized source.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceProgram {
    pub params: Vec<ParamDecl>,
    pub body: Vec<Stmt>,
}

impl SequenceProgram {
    /// Copy with all source positions zeroed, for structural comparison.
    pub fn strip_spans(&self) -> SequenceProgram {
        SequenceProgram {
            params: self
                .params
                .iter()
                .map(|p| ParamDecl {
                    name: p.name.clone(),
                    default: p.default.clone(),
                    span: Span::default(),
                })
                .collect(),
            body: self.body.iter().map(Stmt::strip).collect(),
        }
    }

    /// Every free name referenced by the program, in order of appearance.
    pub fn referenced_names(&self) -> Vec<String> {
        fn walk(stmts: &[Stmt], out: &mut Vec<String>) {
            for s in stmts {
                match s {
                    Stmt::Wait { duration, .. } => duration.collect_vars(out),
                    Stmt::Pulse { angle, .. } => angle.collect_vars(out),
                    Stmt::Repeat { body, .. } => walk(body, out),
                }
            }
        }
        let mut out = Vec::new();
        for p in &self.params {
            if let Some(d) = &p.default {
                d.collect_vars(&mut out);
            }
        }
        walk(&self.body, &mut out);
        out
    }
}

/// A program with its bindings and timing convention, ready to be compiled
/// at any pulse spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub program: SequenceProgram,
    pub bindings: Bindings,
    pub timing: TimingConvention,
}

impl Sequence {
    pub fn new(name: impl Into<String>, program: SequenceProgram) -> Self {
        Sequence {
            name: name.into(),
            program,
            bindings: Bindings::new(),
            timing: TimingConvention::default(),
        }
    }

    pub fn from_source(name: impl Into<String>, source: &str) -> Result<Self, DslError> {
        Ok(Sequence::new(name, parse(source)?))
    }

    pub fn preset(p: Preset) -> Self {
        Sequence::new(p.name(), p.program())
    }

    pub fn bind(mut self, name: &str, value: f64) -> Self {
        self.bindings.insert(name.to_string(), value);
        self
    }

    pub fn with_timing(mut self, timing: TimingConvention) -> Self {
        self.timing = timing;
        self
    }

    /// Compiles one period at pulse spacing `tau_s`.
    pub fn compile_at(&self, tau_s: f64, r: &Resolved) -> Result<SegmentList, DslError> {
        let mut b = self.bindings.clone();
        b.insert("tau".into(), tau_s);
        compile(&self.program, &b, self.timing, PulseDrive::from_resolved(r))
    }
}
