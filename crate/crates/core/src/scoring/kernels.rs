//! Slice-level score functions and their analytic gradients.
//!
//! Complex-valued kinds (RotatE, ComplEx) store each complex coordinate as an
//! interleaved `(re, im)` pair. RotatE relations are one phase angle per
//! complex coordinate, so their rows are half the entity width.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    TransE,
    RotatE,
    DistMult,
    ComplEx,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::TransE,
        ModelKind::RotatE,
        ModelKind::DistMult,
        ModelKind::ComplEx,
    ];

    /// Distance-based kinds use the margin and a norm; similarity-based kinds
    /// are bilinear.
    pub fn is_distance_based(self) -> bool {
        matches!(self, ModelKind::TransE | ModelKind::RotatE)
    }

    pub fn needs_even_dim(self) -> bool {
        matches!(self, ModelKind::RotatE | ModelKind::ComplEx)
    }

    pub fn relation_dim(self, entity_dim: usize) -> usize {
        match self {
            ModelKind::RotatE => entity_dim / 2,
            _ => entity_dim,
        }
    }

    pub fn default_norm(self) -> Norm {
        match self {
            ModelKind::TransE => Norm::L1,
            _ => Norm::L2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::TransE => "transe",
            ModelKind::RotatE => "rotate",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "rotate" => Ok(ModelKind::RotatE),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            _ => Err(Error::config(format!("unknown model kind {s:?}"))),
        }
    }
}

/// Distance norm for distance-based kinds. For RotatE, `L1` sums the moduli
/// of the complex coordinates and `L2` is the Euclidean norm of the whole
/// complex difference vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            _ => Err(Error::config(format!("unknown norm {s:?}"))),
        }
    }
}

/// Score function parameters shared by every triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreFn<F> {
    pub kind: ModelKind,
    pub margin: F,
    pub norm: Norm,
}

/// Gradient buffers for the three slots; each must have the matching row width.
pub struct SlotGrads<'a, F> {
    pub head: &'a mut [F],
    pub relation: &'a mut [F],
    pub tail: &'a mut [F],
}

impl<F: Scalar> ScoreFn<F> {
    pub fn score(&self, h: &[F], r: &[F], t: &[F]) -> F {
        match self.kind {
            ModelKind::TransE => self.margin - transe_distance(self.norm, h, r, t),
            ModelKind::RotatE => self.margin - rotate_distance(self.norm, h, r, t),
            ModelKind::DistMult => h
                .iter()
                .zip(r)
                .zip(t)
                .fold(F::zero(), |acc, ((&a, &b), &c)| acc + a * b * c),
            ModelKind::ComplEx => {
                let mut acc = F::zero();
                for k in 0..h.len() / 2 {
                    let (a, b) = (h[2 * k], h[2 * k + 1]);
                    let (c, d) = (r[2 * k], r[2 * k + 1]);
                    let (e, g) = (t[2 * k], t[2 * k + 1]);
                    acc += (a * c - b * d) * e + (a * d + b * c) * g;
                }
                acc
            }
        }
    }

    /// Returns the score and adds `upstream * ∂f/∂slot` into each gradient buffer.
    pub fn score_and_grad(&self, h: &[F], r: &[F], t: &[F], upstream: F, g: SlotGrads<'_, F>) -> F {
        match self.kind {
            ModelKind::TransE => {
                let n = h.len();
                let diff: Vec<F> = (0..n).map(|i| h[i] + r[i] - t[i]).collect();
                let dist = lp_norm(self.norm, &diff);
                for i in 0..n {
                    // ∂dist/∂diff_i
                    let dd = match self.norm {
                        Norm::L1 => sign(diff[i]),
                        Norm::L2 => safe_div(diff[i], dist),
                    };
                    let s = upstream * dd;
                    g.head[i] -= s;
                    g.relation[i] -= s;
                    g.tail[i] += s;
                }
                self.margin - dist
            }
            ModelKind::RotatE => {
                let m = h.len() / 2;
                let mut d = vec![F::zero(); 2 * m];
                for k in 0..m {
                    let (a, b) = (h[2 * k], h[2 * k + 1]);
                    let (sin, cos) = r[k].sin_cos();
                    d[2 * k] = a * cos - b * sin - t[2 * k];
                    d[2 * k + 1] = a * sin + b * cos - t[2 * k + 1];
                }
                let moduli: Vec<F> = (0..m)
                    .map(|k| d[2 * k].hypot(d[2 * k + 1]))
                    .collect();
                let dist = match self.norm {
                    Norm::L1 => moduli.iter().fold(F::zero(), |acc, &x| acc + x),
                    Norm::L2 => lp_norm(Norm::L2, &d),
                };
                for k in 0..m {
                    let denom = match self.norm {
                        Norm::L1 => moduli[k],
                        Norm::L2 => dist,
                    };
                    // ∂dist/∂(dx, dy)
                    let gx = safe_div(d[2 * k], denom);
                    let gy = safe_div(d[2 * k + 1], denom);
                    let (a, b) = (h[2 * k], h[2 * k + 1]);
                    let (sin, cos) = r[k].sin_cos();
                    let s = -upstream;
                    g.head[2 * k] += s * (gx * cos + gy * sin);
                    g.head[2 * k + 1] += s * (-gx * sin + gy * cos);
                    g.relation[k] += s * (gx * (-a * sin - b * cos) + gy * (a * cos - b * sin));
                    g.tail[2 * k] -= s * gx;
                    g.tail[2 * k + 1] -= s * gy;
                }
                self.margin - dist
            }
            ModelKind::DistMult => {
                let mut acc = F::zero();
                for i in 0..h.len() {
                    acc += h[i] * r[i] * t[i];
                    g.head[i] += upstream * r[i] * t[i];
                    g.relation[i] += upstream * h[i] * t[i];
                    g.tail[i] += upstream * h[i] * r[i];
                }
                acc
            }
            ModelKind::ComplEx => {
                let mut acc = F::zero();
                for k in 0..h.len() / 2 {
                    let (i, j) = (2 * k, 2 * k + 1);
                    let (a, b) = (h[i], h[j]);
                    let (c, d) = (r[i], r[j]);
                    let (e, gg) = (t[i], t[j]);
                    acc += (a * c - b * d) * e + (a * d + b * c) * gg;
                    g.head[i] += upstream * (c * e + d * gg);
                    g.head[j] += upstream * (c * gg - d * e);
                    g.relation[i] += upstream * (a * e + b * gg);
                    g.relation[j] += upstream * (a * gg - b * e);
                    g.tail[i] += upstream * (a * c - b * d);
                    g.tail[j] += upstream * (a * d + b * c);
                }
                acc
            }
        }
    }
}

#[inline]
fn sign<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else if x < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}

/// Subgradient convention: zero where the norm is not differentiable.
#[inline]
fn safe_div<F: Scalar>(x: F, denom: F) -> F {
    if denom > F::zero() {
        x / denom
    } else {
        F::zero()
    }
}

pub(crate) fn lp_norm<F: Scalar>(norm: Norm, v: &[F]) -> F {
    match norm {
        Norm::L1 => v.iter().fold(F::zero(), |acc, &x| acc + x.abs()),
        Norm::L2 => v.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt(),
    }
}

fn transe_distance<F: Scalar>(norm: Norm, h: &[F], r: &[F], t: &[F]) -> F {
    let mut acc = F::zero();
    for i in 0..h.len() {
        let d = h[i] + r[i] - t[i];
        acc += match norm {
            Norm::L1 => d.abs(),
            Norm::L2 => d * d,
        };
    }
    match norm {
        Norm::L1 => acc,
        Norm::L2 => acc.sqrt(),
    }
}

fn rotate_distance<F: Scalar>(norm: Norm, h: &[F], r: &[F], t: &[F]) -> F {
    let mut acc = F::zero();
    for k in 0..h.len() / 2 {
        let (a, b) = (h[2 * k], h[2 * k + 1]);
        let (sin, cos) = r[k].sin_cos();
        let dx = a * cos - b * sin - t[2 * k];
        let dy = a * sin + b * cos - t[2 * k + 1];
        acc += match norm {
            Norm::L1 => dx.hypot(dy),
            Norm::L2 => dx * dx + dy * dy,
        };
    }
    match norm {
        Norm::L1 => acc,
        Norm::L2 => acc.sqrt(),
    }
}

/// Precomputed query for scoring every candidate in one open slot.
///
/// Each kind folds the fixed anchor and relation into a single vector so a
/// candidate costs one pass over `d` values.
pub(crate) struct CandidateQuery<F> {
    score_fn: ScoreFn<F>,
    open_head: bool,
    query: Vec<F>,
}

impl<F: Scalar> CandidateQuery<F> {
    pub fn new(score_fn: ScoreFn<F>, anchor: &[F], relation: &[F], open_head: bool) -> Self {
        let d = anchor.len();
        let mut query = vec![F::zero(); d];
        match score_fn.kind {
            // tail: h + r ; head: t - r
            ModelKind::TransE => {
                for i in 0..d {
                    query[i] = if open_head {
                        anchor[i] - relation[i]
                    } else {
                        anchor[i] + relation[i]
                    };
                }
            }
            // tail: h∘r ; head: t∘conj(r) (unit modulus makes both exact)
            ModelKind::RotatE => {
                for k in 0..d / 2 {
                    let (a, b) = (anchor[2 * k], anchor[2 * k + 1]);
                    let (sin, cos) = relation[k].sin_cos();
                    let sin = if open_head { -sin } else { sin };
                    query[2 * k] = a * cos - b * sin;
                    query[2 * k + 1] = a * sin + b * cos;
                }
            }
            ModelKind::DistMult => {
                for i in 0..d {
                    query[i] = anchor[i] * relation[i];
                }
            }
            // tail: q = h r, f = Re(q conj(e)) ; head: w = r conj(t), f = Re(e w)
            ModelKind::ComplEx => {
                for k in 0..d / 2 {
                    let (a, b) = (anchor[2 * k], anchor[2 * k + 1]);
                    let (c, dd) = (relation[2 * k], relation[2 * k + 1]);
                    if open_head {
                        query[2 * k] = c * a + dd * b;
                        query[2 * k + 1] = dd * a - c * b;
                    } else {
                        query[2 * k] = a * c - b * dd;
                        query[2 * k + 1] = a * dd + b * c;
                    }
                }
            }
        }
        CandidateQuery {
            score_fn,
            open_head,
            query,
        }
    }

    pub fn score(&self, candidate: &[F]) -> F {
        let q = &self.query;
        let sf = &self.score_fn;
        match sf.kind {
            ModelKind::TransE => {
                let mut acc = F::zero();
                for i in 0..q.len() {
                    let d = q[i] - candidate[i];
                    acc += match sf.norm {
                        Norm::L1 => d.abs(),
                        Norm::L2 => d * d,
                    };
                }
                sf.margin
                    - match sf.norm {
                        Norm::L1 => acc,
                        Norm::L2 => acc.sqrt(),
                    }
            }
            ModelKind::RotatE => {
                let mut acc = F::zero();
                for k in 0..q.len() / 2 {
                    let dx = q[2 * k] - candidate[2 * k];
                    let dy = q[2 * k + 1] - candidate[2 * k + 1];
                    acc += match sf.norm {
                        Norm::L1 => dx.hypot(dy),
                        Norm::L2 => dx * dx + dy * dy,
                    };
                }
                sf.margin
                    - match sf.norm {
                        Norm::L1 => acc,
                        Norm::L2 => acc.sqrt(),
                    }
            }
            ModelKind::DistMult => q
                .iter()
                .zip(candidate)
                .fold(F::zero(), |acc, (&a, &b)| acc + a * b),
            ModelKind::ComplEx => {
                let mut acc = F::zero();
                for k in 0..q.len() / 2 {
                    let (qr, qi) = (q[2 * k], q[2 * k + 1]);
                    let (er, ei) = (candidate[2 * k], candidate[2 * k + 1]);
                    acc += if self.open_head {
                        er * qr - ei * qi
                    } else {
                        qr * er + qi * ei
                    };
                }
                acc
            }
        }
    }
}
