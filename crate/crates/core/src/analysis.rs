//! Univariate screening of features against the binary stress label.

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::features::FeatureSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub feature: String,
    /// Infinite when the groups are internally constant but differ.
    #[serde(with = "nonfinite")]
    pub f_statistic: f64,
    pub p_value: f64,
    /// Point-biserial correlation with the stressed label.
    pub r_value: f64,
}

/// JSON has no infinities; those travel as strings.
mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper tail `P(F > f)` of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

fn split_groups(values: &[f64], labels: &[u8]) -> Result<[Vec<f64>; 2]> {
    if values.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: values.len(), got: labels.len() });
    }
    let mut g = [Vec::new(), Vec::new()];
    for (&v, &l) in values.iter().zip(labels) {
        if l > 1 {
            return Err(Error::InvalidInput(format!("label {l} is not binary")));
        }
        g[usize::from(l)].push(v);
    }
    if g.iter().any(Vec::is_empty) {
        return Err(Error::SingleClass);
    }
    Ok(g)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// One-way ANOVA F over the two label groups and its p-value on `(1, n - 2)` df.
pub fn f_test(values: &[f64], labels: &[u8]) -> Result<(f64, f64)> {
    let g = split_groups(values, labels)?;
    if g.iter().any(|x| x.len() < 2) {
        return Err(Error::InvalidInput("each class needs at least two rows".into()));
    }
    let n = values.len() as f64;
    let grand = mean(values);
    let ssb: f64 = g.iter().map(|x| x.len() as f64 * (mean(x) - grand).powi(2)).sum();
    let ssw: f64 = g.iter().map(|x| {
        let m = mean(x);
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>()
    }).sum();
    let df2 = n - 2.0;
    if ssw == 0.0 {
        return Ok(if ssb == 0.0 { (0.0, 1.0) } else { (f64::INFINITY, 0.0) });
    }
    let f = ssb / (ssw / df2);
    Ok((f, f_survival(f, 1.0, df2)))
}

/// Pearson correlation between `values` and the 0/1 labels; 0 for constant values.
pub fn point_biserial(values: &[f64], labels: &[u8]) -> Result<f64> {
    split_groups(values, labels)?;
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let (mx, my) = (mean(values), mean(&y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in values.iter().zip(&y) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 {
        return Ok(0.0);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Every feature of `set` scored, most significant first.
pub fn screen_features(ds: &LabeledDataset, set: FeatureSet) -> Result<Vec<FeatureStat>> {
    if ds.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let d = ds.design(set)?;
    let labels: Vec<u8> = d.y.iter().map(|&c| c as u8).collect();
    let mut out = (0..d.x.n_cols())
        .map(|j| {
            let col = d.x.column(j);
            let (f, p) = f_test(&col, &labels)?;
            Ok(FeatureStat {
                feature: d.feature_names[j].to_string(),
                f_statistic: f,
                p_value: p,
                r_value: point_biserial(&col, &labels)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.p_value.total_cmp(&b.p_value));
    Ok(out)
}
