//! Pointwise kernels of the nonlinear (convective) forms.
//!
//! Every form is written as `T(a, b, w) = F(a, b) . w + G(a, b) : grad w`,
//! bilinear in `(a, b)`. Gradients use `g[i][j] = d a_i / d x_j` and
//! `G[c][d]` pairs with `d w_c / d x_d`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FormKind {
    /// `(a . grad) b`
    Conv,
    /// `((a . grad) b, w) / 2 - ((a . grad) w, b) / 2`
    Skew,
    /// `(curl b) x a`
    Rot,
    /// `(a . grad) b + (div a) b`
    Cons,
    /// `2 D(a) b + (div a) b`
    Emac,
}

impl FormKind {
    pub const ALL: [FormKind; 5] = [
        FormKind::Conv,
        FormKind::Skew,
        FormKind::Rot,
        FormKind::Cons,
        FormKind::Emac,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FormKind::Conv => "conv",
            FormKind::Skew => "skew",
            FormKind::Rot => "rot",
            FormKind::Cons => "cons",
            FormKind::Emac => "emac",
        }
    }

    /// Whether the form carries a test-function gradient term.
    pub fn has_gradient_term(self) -> bool {
        matches!(self, FormKind::Skew)
    }
}

impl fmt::Display for FormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownForm(pub String);

impl fmt::Display for UnknownForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown form '{}' (expected conv, skew, rot, cons or emac)", self.0)
    }
}

impl std::error::Error for UnknownForm {}

impl FromStr for FormKind {
    type Err = UnknownForm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FormKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownForm(s.to_string()))
    }
}

pub type Grad = [[f64; 2]; 2];

/// `(F, G)` for the pair `(a, b)` at one point.
#[inline]
pub fn flux(form: FormKind, a: [f64; 2], ga: &Grad, b: [f64; 2], gb: &Grad) -> ([f64; 2], Grad) {
    let adv = |c: usize| a[0] * gb[c][0] + a[1] * gb[c][1];
    let zero = [[0.0; 2]; 2];
    match form {
        FormKind::Conv => ([adv(0), adv(1)], zero),
        FormKind::Skew => (
            [0.5 * adv(0), 0.5 * adv(1)],
            [
                [-0.5 * a[0] * b[0], -0.5 * a[1] * b[0]],
                [-0.5 * a[0] * b[1], -0.5 * a[1] * b[1]],
            ],
        ),
        FormKind::Rot => {
            let w = gb[1][0] - gb[0][1];
            ([-w * a[1], w * a[0]], zero)
        }
        FormKind::Cons => {
            let div = ga[0][0] + ga[1][1];
            ([adv(0) + div * b[0], adv(1) + div * b[1]], zero)
        }
        FormKind::Emac => {
            let div = ga[0][0] + ga[1][1];
            let f = |c: usize| {
                (0..2)
                    .map(|j| (ga[c][j] + ga[j][c]) * b[j])
                    .sum::<f64>()
                    + div * b[c]
            };
            ([f(0), f(1)], zero)
        }
    }
}

#[inline]
pub fn pair(f: &[f64; 2], g: &Grad, w: [f64; 2], gw: &Grad) -> f64 {
    f[0] * w[0] + f[1] * w[1] + g[0][0] * gw[0][0] + g[0][1] * gw[0][1] + g[1][0] * gw[1][0] + g[1][1] * gw[1][1]
}
