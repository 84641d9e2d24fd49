//! Kernel presets and the inline expression grammar.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | atom
//! atom   := number | '|h|' ['^' number] | 'sign(x1;' number ')'
//!         | ('min' | 'max') '(' expr ',' expr ')' | '(' expr ')'
//! ```
//!
//! Expressions see `h` only through `|h|`, so every inline kernel is even
//! in `h`. `sign(x1; w)` is `+1` when `⌊|x₁|/w⌋` is even and `-1` otherwise.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use stablelike::operator::kernel::sign_pattern;
use stablelike::operator::{validate_assumptions, JumpKernel};
use stablelike::rng::SeedTree;

use crate::error::CliError;

/// Points used to validate an inline kernel against its declared constants.
pub const VALIDATION_POINTS: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    /// `stable`, `holder_bump` or `discontinuous_in_x`; ignored when `expr` is set.
    pub preset: String,
    pub a: f64,
    pub beta: f64,
    pub width: f64,
    /// Inline `n(x,h)`; needs `kappa`, `k_const` and `beta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_const: Option<f64>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            preset: "holder_bump".into(),
            a: 0.5,
            beta: 0.5,
            width: 0.5,
            expr: None,
            kappa: None,
            k_const: None,
        }
    }
}

impl KernelConfig {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: name.into(),
            ..Self::default()
        }
    }

    pub fn build(&self, d: usize) -> Result<JumpKernel, CliError> {
        match &self.expr {
            Some(src) => {
                let (kappa, k_const) = match (self.kappa, self.k_const) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(CliError::Config("inline kernels need `kappa` and `k_const`".into())),
                };
                inline_kernel(src, kappa, k_const, self.beta, d)
            }
            None => kernel_preset(&self.preset, self.a, self.beta, self.width),
        }
    }
}

pub fn kernel_preset(name: &str, a: f64, beta: f64, width: f64) -> Result<JumpKernel, CliError> {
    let kernel = match name {
        "stable" => JumpKernel::stable(),
        "holder_bump" => JumpKernel::holder_bump(a, beta)?,
        "discontinuous_in_x" => JumpKernel::discontinuous_in_x(a, beta, width)?,
        other => return Err(CliError::Config(format!("unknown kernel preset `{other}`"))),
    };
    Ok(kernel)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// `|h|^p`
    HPow(f64),
    /// `sign(x1; w)`
    Sign(f64),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Min(Box<Expr>, Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x1: f64, rho: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::HPow(p) => rho.powf(*p),
            Expr::Sign(w) => sign_pattern(x1, *w),
            Expr::Neg(a) => -a.eval(x1, rho),
            Expr::Add(a, b) => a.eval(x1, rho) + b.eval(x1, rho),
            Expr::Sub(a, b) => a.eval(x1, rho) - b.eval(x1, rho),
            Expr::Mul(a, b) => a.eval(x1, rho) * b.eval(x1, rho),
            Expr::Min(a, b) => a.eval(x1, rho).min(b.eval(x1, rho)),
            Expr::Max(a, b) => a.eval(x1, rho).max(b.eval(x1, rho)),
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Neg(a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Min(a, b) | Expr::Max(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Widths of every `sign` pattern.
    pub fn sign_widths(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Sign(w) = e {
                out.push(*w);
            }
        });
        out
    }

    /// Radii in `[1e-4, 1e2]` where a `min`/`max` switches branch, located by
    /// bisection on a log grid at `x₁ = 0` and `x₁ = w` for each sign width.
    pub fn kinks(&self) -> Vec<f64> {
        let mut xs = vec![0.0];
        xs.extend(self.sign_widths());
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Min(a, b) | Expr::Max(a, b) = e {
                for &x1 in &xs {
                    let g = |rho: f64| a.eval(x1, rho) - b.eval(x1, rho);
                    let n = 600;
                    let at = |i: usize| 10f64.powf(-4.0 + 6.0 * i as f64 / n as f64);
                    for i in 0..n {
                        let (mut lo, mut hi) = (at(i), at(i + 1));
                        if g(lo).signum() * g(hi).signum() >= 0.0 {
                            continue;
                        }
                        for _ in 0..80 {
                            let mid = 0.5 * (lo + hi);
                            if g(lo).signum() * g(mid).signum() <= 0.0 {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                        out.push(0.5 * (lo + hi));
                    }
                }
            }
        });
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
        out
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:e}"),
            Expr::HPow(p) => write!(f, "|h|^{p:e}"),
            Expr::Sign(w) => write!(f, "sign(x1; {w:e})"),
            Expr::Neg(a) => write!(f, "-({a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Min(a, b) => write!(f, "min({a}, {b})"),
            Expr::Max(a, b) => write!(f, "max({a}, {b})"),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, what: &str) -> CliError {
        CliError::Config(format!("kernel expression `{}`: {what} at offset {}", self.src, self.pos))
    }

    fn skip_ws(&mut self) {
        while self.rest().starts_with(char::is_whitespace) {
            self.pos += self.rest().chars().next().map_or(0, char::len_utf8);
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn eat(&mut self, token: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, token: &str) -> Result<(), CliError> {
        if self.eat(token) {
            Ok(())
        } else {
            Err(self.err(&format!("expected `{token}`")))
        }
    }

    fn number(&mut self) -> Result<f64, CliError> {
        self.skip_ws();
        let len = self
            .rest()
            .char_indices()
            .take_while(|&(i, c)| {
                c.is_ascii_digit()
                    || c == '.'
                    || c == 'e'
                    || c == 'E'
                    || ((c == '-' || c == '+') && i > 0 && matches!(self.rest().as_bytes()[i - 1], b'e' | b'E'))
            })
            .count();
        let text = &self.rest()[..len];
        let v: f64 = text.parse().map_err(|_| self.err("expected a number"))?;
        self.pos += len;
        Ok(v)
    }

    fn expr(&mut self) -> Result<Expr, CliError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat("+") {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat("-") {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, CliError> {
        let mut lhs = self.unary()?;
        while self.eat("*") {
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, CliError> {
        if self.eat("-") {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn pair(&mut self) -> Result<(Box<Expr>, Box<Expr>), CliError> {
        self.expect("(")?;
        let a = self.expr()?;
        self.expect(",")?;
        let b = self.expr()?;
        self.expect(")")?;
        Ok((Box::new(a), Box::new(b)))
    }

    fn atom(&mut self) -> Result<Expr, CliError> {
        if self.eat("|h|") {
            let p = if self.eat("^") { self.number()? } else { 1.0 };
            return Ok(Expr::HPow(p));
        }
        if self.eat("sign") {
            self.expect("(")?;
            self.expect("x1")?;
            self.expect(";")?;
            let w = self.number()?;
            self.expect(")")?;
            if !(w > 0.0) {
                return Err(self.err("sign width must be positive"));
            }
            return Ok(Expr::Sign(w));
        }
        if self.eat("min") {
            let (a, b) = self.pair()?;
            return Ok(Expr::Min(a, b));
        }
        if self.eat("max") {
            let (a, b) = self.pair()?;
            return Ok(Expr::Max(a, b));
        }
        if self.eat("(") {
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        Ok(Expr::Num(self.number()?))
    }
}

pub fn parse_expr(src: &str) -> Result<Expr, CliError> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

/// Kernel from an expression with declared `(κ, K, β)`, validated on
/// [`VALIDATION_POINTS`] random points; a failed validation is a config
/// error.
pub fn inline_kernel(src: &str, kappa: f64, k_const: f64, beta: f64, d: usize) -> Result<JumpKernel, CliError> {
    let expr = Arc::new(parse_expr(src)?);
    let widths = expr.sign_widths();
    let e = expr.clone();
    let mut kernel = JumpKernel::new("inline", kappa, k_const, beta, move |x, h| {
        let rho = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        e.eval(x[0], rho)
    })?;
    kernel.signature = expr.to_string();
    kernel.x_independent = widths.is_empty();
    kernel.x_axis_only = true;
    kernel.h_breaks = expr.kinks();
    if let Some(&w) = widths.first() {
        kernel = kernel.with_x_breaks_every(w);
        for &other in &widths[1..] {
            let extra = kernel.clone().with_x_breaks_every(other).x_breaks;
            kernel.x_breaks.extend(extra);
        }
        kernel.x_breaks.sort_by(f64::total_cmp);
        kernel.x_breaks.dedup();
    }
    let mut rng = SeedTree::new(0).named("inline-kernel").stream();
    let check = validate_assumptions(&kernel, d, VALIDATION_POINTS, 10.0, &mut rng);
    if !check.pass() {
        return Err(CliError::Config(format!(
            "inline kernel `{src}` violates its declared constants: min n = {:.4}, envelope ratio = {:.4}",
            check.min_n, check.worst_envelope_ratio
        )));
    }
    Ok(kernel)
}
