//! Analytic Jacobian-vector products checked against central differences.

use serde::{Deserialize, Serialize};

use super::{
    attention, gate_fuse, project, sigmoid, FeatureBundle, FusionError, FusionParams, Matrix,
};

/// Which map, and which input of it, to differentiate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradTarget {
    /// `S W^T` with respect to `W`.
    ProjectionWrtW,
    /// Attention output with respect to the query (language features).
    AttendWrtQuery,
    /// Attention output with respect to `W`, through both keys and values.
    AttendWrtProjection,
    /// Fused output with respect to `W_l`.
    GateWrtLanguageWeights,
    /// Fused output with respect to `W_v`.
    GateWrtVisionWeights,
    /// Fused output with respect to the language features.
    GateWrtLanguage,
    /// Fused output with respect to the attended features.
    GateWrtAttended,
    /// Full pipeline output with respect to `W`.
    FusedWrtProjection,
}

impl GradTarget {
    pub const ALL: [GradTarget; 8] = [
        GradTarget::ProjectionWrtW,
        GradTarget::AttendWrtQuery,
        GradTarget::AttendWrtProjection,
        GradTarget::GateWrtLanguageWeights,
        GradTarget::GateWrtVisionWeights,
        GradTarget::GateWrtLanguage,
        GradTarget::GateWrtAttended,
        GradTarget::FusedWrtProjection,
    ];
}

type MapFn<'a> = Box<dyn Fn(&Matrix) -> Result<Matrix, FusionError> + 'a>;

/// `dP` for `P = softmax_rows(A)` given `dA`.
fn softmax_jvp(p: &Matrix, da: &Matrix) -> Matrix {
    Matrix::from_fn(p.rows(), p.cols(), |i, j| {
        let dot: f64 = p.row(i).iter().zip(da.row(i)).map(|(a, b)| a * b).sum();
        p.get(i, j) * (da.get(i, j) - dot)
    })
}

/// `dO` for `O = softmax(Q K^T / sqrt(d)) V` given `dQ`, `dK`, `dV`.
fn attention_jvp(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    dq: Option<&Matrix>,
    dk: Option<&Matrix>,
    dv: Option<&Matrix>,
) -> Result<Matrix, FusionError> {
    let scale = 1.0 / (q.cols() as f64).sqrt();
    let p = attention(q, k, v)?.weights;
    let mut da = Matrix::zeros(q.rows(), k.rows());
    if let Some(dq) = dq {
        da = da.add(&dq.matmul_t(k)?)?;
    }
    if let Some(dk) = dk {
        da = da.add(&q.matmul_t(dk)?)?;
    }
    let dp = softmax_jvp(&p, &da.scale(scale));
    let mut out = dp.matmul(v)?;
    if let Some(dv) = dv {
        out = out.add(&p.matmul(dv)?)?;
    }
    Ok(out)
}

/// `dF` for the gated fusion given tangents of its inputs.
fn gate_jvp(
    l: &Matrix,
    h: &Matrix,
    p: &FusionParams,
    dl: Option<&Matrix>,
    dh: Option<&Matrix>,
    dwl: Option<&Matrix>,
    dwv: Option<&Matrix>,
) -> Result<Matrix, FusionError> {
    let z = l
        .matmul(&p.gate_language)?
        .add(&h.matmul(&p.gate_vision)?)?;
    let g = z.map(sigmoid);
    let zero = Matrix::zeros(l.rows(), l.cols());
    let dl = dl.unwrap_or(&zero);
    let dh = dh.unwrap_or(&zero);
    let mut dz = dl
        .matmul(&p.gate_language)?
        .add(&dh.matmul(&p.gate_vision)?)?;
    if let Some(dwl) = dwl {
        dz = dz.add(&l.matmul(dwl)?)?;
    }
    if let Some(dwv) = dwv {
        dz = dz.add(&h.matmul(dwv)?)?;
    }
    let dg = g.zip_map(&dz, |g, d| g * (1.0 - g) * d)?;
    // F = L + g (H - L)
    let diff = h.sub(l)?;
    let one_minus_g = g.map(|v| 1.0 - v);
    one_minus_g
        .hadamard(dl)?
        .add(&g.hadamard(dh)?)?
        .add(&dg.hadamard(&diff)?)
}

fn unclamped_fuse(l: &Matrix, h: &Matrix, p: &FusionParams) -> Result<Matrix, FusionError> {
    // The public gate_fuse clamps to the convex hull, which is not smooth at
    // the hull boundary; finite differences use the raw formula.
    let g = gate_fuse(l, h, p)?.gate;
    let one_minus_g = g.map(|v| 1.0 - v);
    one_minus_g.hadamard(l)?.add(&g.hadamard(h)?)
}

/// The point, the map and its JVP for one target.
fn setup<'a>(
    target: GradTarget,
    b: &'a FeatureBundle,
    p: &'a FusionParams,
) -> Result<(Matrix, MapFn<'a>, MapFn<'a>), FusionError> {
    p.check(b)?;
    let s = &b.screen;
    let l = &b.language;
    let kv = project(s, &p.projection)?;
    let attended = attention(l, &kv, &kv)?.output;
    Ok(match target {
        GradTarget::ProjectionWrtW => (
            p.projection.clone(),
            Box::new(move |w| project(s, w)),
            Box::new(move |dw| project(s, dw)),
        ),
        GradTarget::AttendWrtQuery => {
            let kv2 = kv.clone();
            (
                l.clone(),
                Box::new(move |q| Ok(attention(q, &kv, &kv)?.output)),
                Box::new(move |dq| attention_jvp(l, &kv2, &kv2, Some(dq), None, None)),
            )
        }
        GradTarget::AttendWrtProjection => (
            p.projection.clone(),
            Box::new(move |w| {
                let kv = project(s, w)?;
                Ok(attention(l, &kv, &kv)?.output)
            }),
            Box::new(move |dw| {
                let dkv = project(s, dw)?;
                attention_jvp(l, &kv, &kv, None, Some(&dkv), Some(&dkv))
            }),
        ),
        GradTarget::GateWrtLanguageWeights => {
            let h2 = attended.clone();
            (
                p.gate_language.clone(),
                Box::new(move |wl| {
                    let q = FusionParams {
                        gate_language: wl.clone(),
                        ..p.clone()
                    };
                    unclamped_fuse(l, &attended, &q)
                }),
                Box::new(move |d| gate_jvp(l, &h2, p, None, None, Some(d), None)),
            )
        }
        GradTarget::GateWrtVisionWeights => {
            let h2 = attended.clone();
            (
                p.gate_vision.clone(),
                Box::new(move |wv| {
                    let q = FusionParams {
                        gate_vision: wv.clone(),
                        ..p.clone()
                    };
                    unclamped_fuse(l, &attended, &q)
                }),
                Box::new(move |d| gate_jvp(l, &h2, p, None, None, None, Some(d))),
            )
        }
        GradTarget::GateWrtLanguage => {
            let h2 = attended.clone();
            (
                l.clone(),
                Box::new(move |x| unclamped_fuse(x, &attended, p)),
                Box::new(move |d| gate_jvp(l, &h2, p, Some(d), None, None, None)),
            )
        }
        GradTarget::GateWrtAttended => (
            attended.clone(),
            Box::new(move |x| unclamped_fuse(l, x, p)),
            Box::new(move |d| gate_jvp(l, &attended, p, None, Some(d), None, None)),
        ),
        GradTarget::FusedWrtProjection => (
            p.projection.clone(),
            Box::new(move |w| {
                let kv = project(s, w)?;
                let h = attention(l, &kv, &kv)?.output;
                unclamped_fuse(l, &h, p)
            }),
            Box::new(move |dw| {
                let dkv = project(s, dw)?;
                let dh = attention_jvp(l, &kv, &kv, None, Some(&dkv), Some(&dkv))?;
                gate_jvp(l, &attended, p, None, Some(&dh), None, None)
            }),
        ),
    })
}

/// Compares the analytic JVP along every coordinate direction of the
/// target's input with the central difference `(f(x + eps e) - f(x - eps e)) / 2 eps`.
///
/// For each direction the error is `max|jvp - fd| / max(max|jvp|, max|fd|, 1e-8)`;
/// the largest over all directions is returned.
pub fn grad_check(
    target: GradTarget,
    b: &FeatureBundle,
    p: &FusionParams,
    eps: f64,
) -> Result<f64, FusionError> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(FusionError::InvalidStep(eps));
    }
    let (x, f, jvp) = setup(target, b, p)?;
    let (rows, cols) = x.shape();
    let mut worst = 0.0f64;
    for i in 0..rows {
        for j in 0..cols {
            let mut dir = Matrix::zeros(rows, cols);
            dir.set(i, j, 1.0);
            let analytic = jvp(&dir)?;
            let mut plus = x.clone();
            plus.set(i, j, x.get(i, j) + eps);
            let mut minus = x.clone();
            minus.set(i, j, x.get(i, j) - eps);
            let numeric = f(&plus)?.sub(&f(&minus)?)?.scale(0.5 / eps);
            let err = analytic.sub(&numeric)?.max_abs();
            let denom = analytic.max_abs().max(numeric.max_abs()).max(1e-8);
            worst = worst.max(err / denom);
        }
    }
    Ok(worst)
}
