use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Parameters are referred to by their position in the owning model.
pub type ParamId = usize;

/// Exact conversion of a finite float to a rational.
pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite value")
}

/// Polynomial with rational coefficients over indexed parameters.
///
/// Monomials are sorted multisets of parameter ids; the map never stores a
/// zero coefficient, so structural equality is polynomial equality.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PolynomialExpr {
    terms: BTreeMap<Vec<ParamId>, BigRational>,
}

impl PolynomialExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Self::zero();
        p.add_term(Vec::new(), c);
        p
    }

    pub fn from_f64(c: f64) -> Self {
        Self::constant(rational(c))
    }

    pub fn one() -> Self {
        Self::constant(BigRational::one())
    }

    pub fn param(p: ParamId) -> Self {
        let mut e = Self::zero();
        e.add_term(vec![p], BigRational::one());
        e
    }

    /// Adds `coef * Π params`, merging with an existing like term.
    pub fn add_term(&mut self, mut params: Vec<ParamId>, coef: BigRational) {
        params.sort_unstable();
        let entry = self.terms.entry(params).or_insert_with(BigRational::zero);
        *entry += coef;
        if entry.is_zero() {
            self.terms.retain(|_, c| !c.is_zero());
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[ParamId], &BigRational)> {
        self.terms.iter().map(|(m, c)| (m.as_slice(), c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.degree() == 0
    }

    pub fn constant_term(&self) -> BigRational {
        self.terms.get(&Vec::new()).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Coefficient of the degree-one monomial `p`.
    pub fn linear_coeff(&self, p: ParamId) -> BigRational {
        self.terms.get(&vec![p]).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn params(&self) -> impl Iterator<Item = ParamId> + '_ {
        let mut all: Vec<ParamId> = self.terms.keys().flatten().copied().collect();
        all.sort_unstable();
        all.dedup();
        all.into_iter()
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * k)).collect(),
        }
    }

    pub fn eval_exact(&self, values: &[BigRational]) -> BigRational {
        self.terms
            .iter()
            .map(|(m, c)| m.iter().fold(c.clone(), |acc, &p| acc * &values[p]))
            .fold(BigRational::zero(), |a, b| a + b)
    }

    /// Exact evaluation at a real valuation, converted to `f64` once at the end.
    pub fn eval(&self, values: &[f64]) -> f64 {
        let exact: Vec<BigRational> = values.iter().map(|&v| rational(v)).collect();
        to_f64(&self.eval_exact(&exact))
    }

    /// Floating-point evaluation, for hot loops.
    pub fn eval_f64(&self, values: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| m.iter().fold(to_f64(c), |acc, &p| acc * values[p]))
            .sum()
    }

    /// Renders with parameter names, e.g. `1 - p1 - p2` or `1/2*p2`.
    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        Named { expr: self, names }
    }
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

struct Named<'a> {
    expr: &'a PolynomialExpr,
    names: &'a [String],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.expr.is_zero() {
            return write!(f, "0");
        }
        for (i, (mono, coef)) in self.expr.terms.iter().enumerate() {
            let neg = coef.is_negative();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mag = coef.abs();
            let unit = mag == BigRational::one();
            if !unit || mono.is_empty() {
                write!(f, "{mag}")?;
                if !mono.is_empty() {
                    write!(f, "*")?;
                }
            }
            let names: Vec<&str> = mono.iter().map(|&p| self.names[p].as_str()).collect();
            write!(f, "{}", names.join("*"))?;
        }
        Ok(())
    }
}

impl fmt::Display for PolynomialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.params().max().map_or(0, |p| p + 1);
        let names: Vec<String> = (0..n).map(|p| format!("x{p}")).collect();
        let shown = self.display(&names).to_string();
        f.write_str(&shown)
    }
}

impl Add for &PolynomialExpr {
    type Output = PolynomialExpr;

    fn add(self, rhs: &PolynomialExpr) -> PolynomialExpr {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Neg for &PolynomialExpr {
    type Output = PolynomialExpr;

    fn neg(self) -> PolynomialExpr {
        self.scale(&-BigRational::one())
    }
}

impl Sub for &PolynomialExpr {
    type Output = PolynomialExpr;

    fn sub(self, rhs: &PolynomialExpr) -> PolynomialExpr {
        self + &(-rhs)
    }
}

impl Mul for &PolynomialExpr {
    type Output = PolynomialExpr;

    fn mul(self, rhs: &PolynomialExpr) -> PolynomialExpr {
        let mut out = PolynomialExpr::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                let mono: Vec<ParamId> = m1.iter().chain(m2).copied().collect();
                out.add_term(mono, c1 * c2);
            }
        }
        out
    }
}

/// Parses `a` or `a/b` exactly; any other decimal goes through `f64`, matching
/// how probabilities are stored in a POSG.
pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        return (!d.is_zero()).then(|| BigRational::new(n, d));
    }
    if let Ok(n) = text.parse::<BigInt>() {
        return Some(BigRational::from_integer(n));
    }
    text.parse::<f64>().ok().filter(|x| x.is_finite()).map(rational)
}
