use std::fmt;

use super::lexer::{tokenize, Tok, Token};
use super::{Axis, BinOp, DslError, Expr, ParamDecl, SequenceProgram, Span, Stmt, RESERVED};

const KEYWORDS: [&str; 4] = ["wait", "pulse", "repeat", "param"];

/// Parses sequence source text into a program.
pub fn parse(source: &str) -> Result<SequenceProgram, DslError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut params: Vec<ParamDecl> = Vec::new();
    let mut body = Vec::new();
    while p.peek().tok != Tok::Eof {
        if p.peek_keyword("param") {
            let decl = p.param_decl()?;
            if let Some(default) = &decl.default {
                let mut names = Vec::new();
                default.collect_vars(&mut names);
                for name in names {
                    let known = RESERVED.contains(&name.as_str())
                        || params.iter().any(|d| d.name == name);
                    if !known {
                        return Err(DslError::UnboundParameter {
                            name,
                            span: Some(decl.span),
                        });
                    }
                }
            }
            params.push(decl);
        } else {
            body.push(p.stmt()?);
        }
    }
    Ok(SequenceProgram { params, body })
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> DslError {
        let t = self.peek();
        DslError::Syntax {
            span: t.span,
            found: t.tok.describe(),
            expected: expected.to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> Result<Token, DslError> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.error(expected))
        }
    }

    fn ident(&mut self, expected: &str) -> Result<(String, Span), DslError> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => Err(self.error(expected)),
        }
    }

    fn param_decl(&mut self) -> Result<ParamDecl, DslError> {
        let span = self.bump().span;
        let (name, name_span) = self.ident("a parameter name")?;
        if KEYWORDS.contains(&name.as_str()) || RESERVED.contains(&name.as_str()) {
            return Err(DslError::Syntax {
                span: name_span,
                found: name,
                expected: "a parameter name that is not reserved".into(),
            });
        }
        let default = if self.peek().tok == Tok::Eq {
            self.bump();
            Some(self.expr()?)
        } else {
            None
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(ParamDecl {
            name,
            default,
            span,
        })
    }

    fn stmt(&mut self) -> Result<Stmt, DslError> {
        let (word, span) = self.ident("`wait`, `pulse`, `repeat` or `param`")?;
        match word.as_str() {
            "wait" => {
                let duration = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(Stmt::Wait { duration, span })
            }
            "pulse" => {
                let angle = self.expr()?;
                let (axis_name, axis_span) = self.ident("a pulse axis (`x` or `y`)")?;
                self.expect(Tok::Semi, "`;`")?;
                let axis = Axis::from_name(&axis_name).ok_or(DslError::Syntax {
                    span: axis_span,
                    found: axis_name,
                    expected: "a pulse axis (`x` or `y`)".into(),
                })?;
                Ok(Stmt::Pulse { angle, axis, span })
            }
            "repeat" => {
                let count = match self.peek().tok {
                    Tok::Number(v, _) if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                        self.bump();
                        v as u32
                    }
                    _ => return Err(self.error("a positive integer repeat count")),
                };
                self.expect(Tok::LBrace, "`{`")?;
                let mut body = Vec::new();
                while self.peek().tok != Tok::RBrace {
                    if self.peek().tok == Tok::Eof {
                        return Err(self.error("`}`"));
                    }
                    if self.peek_keyword("param") {
                        return Err(self.error("a statement (parameters are declared at top level)"));
                    }
                    body.push(self.stmt()?);
                }
                self.bump();
                if self.peek().tok == Tok::Semi {
                    self.bump();
                }
                Ok(Stmt::Repeat { count, body, span })
            }
            _ => Err(DslError::Syntax {
                span,
                found: word,
                expected: "`wait`, `pulse`, `repeat` or `param`".into(),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.peek().tok == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        match self.peek().tok.clone() {
            Tok::Number(v, _) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                Ok(Expr::Var(name))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Err(self.error("an expression")),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(name) => write!(f, "{name}"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                };
                write!(f, "({a} {sym} {b})")
            }
        }
    }
}

fn write_block(f: &mut fmt::Formatter<'_>, stmts: &[Stmt], indent: usize) -> fmt::Result {
    let pad = "    ".repeat(indent);
    for s in stmts {
        match s {
            Stmt::Wait { duration, .. } => writeln!(f, "{pad}wait {duration};")?,
            Stmt::Pulse { angle, axis, .. } => writeln!(f, "{pad}pulse {angle} {};", axis.name())?,
            Stmt::Repeat { count, body, .. } => {
                writeln!(f, "{pad}repeat {count} {{")?;
                write_block(f, body, indent + 1)?;
                writeln!(f, "{pad}}}")?;
            }
        }
    }
    Ok(())
}

impl fmt::Display for SequenceProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.params {
            match &p.default {
                Some(d) => writeln!(f, "param {} = {d};", p.name)?,
                None => writeln!(f, "param {};", p.name)?,
            }
        }
        write_block(f, &self.body, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cpmg_repeat_block() {
        let prog =
            parse("repeat 2 { wait tau/2; pulse pi x; wait tau; pulse pi x; wait tau/2; }").unwrap();
        assert_eq!(prog.body.len(), 1);
        let Stmt::Repeat { count, body, .. } = &prog.body[0] else {
            panic!("expected repeat, got {:?}", prog.body[0]);
        };
        assert_eq!(*count, 2);
        let kinds: Vec<&str> = body
            .iter()
            .map(|s| match s {
                Stmt::Wait { .. } => "wait",
                Stmt::Pulse { .. } => "pulse",
                Stmt::Repeat { .. } => "repeat",
            })
            .collect();
        assert_eq!(kinds, ["wait", "pulse", "wait", "pulse", "wait"]);
    }

    #[test]
    fn pulse_angle_with_offset() {
        let prog = parse("pulse pi+eps x;").unwrap();
        let Stmt::Pulse { angle, axis, .. } = &prog.body[0] else {
            panic!()
        };
        assert_eq!(*axis, Axis::X);
        let v = angle
            .eval(&|n| match n {
                "pi" => Some(std::f64::consts::PI),
                "eps" => Some(0.05),
                _ => None,
            })
            .unwrap();
        assert_eq!(v, std::f64::consts::PI + 0.05);
    }

    #[test]
    fn reports_trailing_token() {
        let err = parse("pulse pi z q").unwrap_err();
        match err {
            DslError::Syntax { span, found, .. } => {
                assert_eq!(found, "q");
                assert_eq!(span, Span { line: 1, col: 12 });
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_axis_and_counts() {
        assert!(matches!(
            parse("pulse pi z;"),
            Err(DslError::Syntax { found, .. }) if found == "z"
        ));
        assert!(parse("repeat 0 { wait 1; }").is_err());
        assert!(parse("repeat 1.5 { wait 1; }").is_err());
        assert!(parse("repeat 2 { wait 1; ").is_err());
        assert!(parse("wait (tau;").is_err());
    }

    #[test]
    fn params_and_comments() {
        let prog = parse("# flip angle\nparam eps = 0.01;\nparam n;\nwait tau*n; pulse pi+eps y;").unwrap();
        assert_eq!(prog.params.len(), 2);
        assert_eq!(prog.params[0].name, "eps");
        assert!(prog.params[1].default.is_none());
        assert!(matches!(
            parse("param a = b;"),
            Err(DslError::UnboundParameter { name, .. }) if name == "b"
        ));
        assert!(parse("param tau = 1;").is_err());
    }

    #[test]
    fn precedence() {
        let prog = parse("wait 1 + 2 * 3 - -4 / 2;").unwrap();
        let Stmt::Wait { duration, .. } = &prog.body[0] else {
            panic!()
        };
        assert_eq!(duration.eval(&|_| None).unwrap(), 9.0);
    }

    #[test]
    fn pretty_print_round_trip() {
        let src = "param eps = 0.05; repeat 3 { wait tau/2 - 1e-9; pulse pi+eps x; wait -(-tau); } pulse pi/2 y;";
        let a = parse(src).unwrap();
        let printed = a.to_string();
        let b = parse(&printed).unwrap();
        assert_eq!(a.strip_spans(), b.strip_spans());
        assert_eq!(b.to_string(), printed);
    }
}
