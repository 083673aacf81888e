//! Query/training streams: synthetic RKHS functions along a parametric path,
//! or user-supplied CSV datasets.
//!
//! A stream materializes into a time-indexed sequence of `(t, x, y)` points.
//! The broadcast loop queries the stream position at each tick; the same
//! points optionally feed the experts as training samples. Synthetic streams
//! construct the ground truth as a finite kernel expansion
//! f(x) = Σ a_j κ(x, z_j) whose RKHS norm is set exactly via the Gram matrix,
//! so that ‖f‖_κ ≤ Γ holds by construction and fused-bound violations are
//! detectable.

use asyncgp_core::KernelSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// A ground-truth function represented as a finite kernel expansion.
#[derive(Debug, Clone)]
pub struct KernelExpansion {
    kernel: KernelSpec,
    centers: Vec<Vec<f64>>,
    coefficients: Vec<f64>,
    norm: f64,
}

impl KernelExpansion {
    /// Draw `n_centers` random centers in `domain` and rescale random
    /// coefficients so that ‖f‖_κ equals `norm_target` exactly.
    pub fn random(
        kernel: &KernelSpec,
        domain: &[(f64, f64)],
        n_centers: usize,
        norm_target: f64,
        seed: u64,
    ) -> Result<Self> {
        if domain.len() != kernel.dim() {
            return Err(SimError::Validation(format!(
                "domain has {} dims, kernel expects {}",
                domain.len(),
                kernel.dim()
            )));
        }
        if n_centers == 0 {
            return Err(SimError::Validation("expansion needs at least one center".into()));
        }
        if !(norm_target.is_finite() && norm_target > 0.0) {
            return Err(SimError::Validation("norm target must be finite and > 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<Vec<f64>> = (0..n_centers)
            .map(|_| domain.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect())
            .collect();
        let mut coefficients: Vec<f64> = (0..n_centers).map(|_| rng.random_range(-1.0..1.0)).collect();

        // ||f||^2 = a^T K a over the centers.
        let mut norm2 = 0.0;
        for i in 0..n_centers {
            for j in 0..n_centers {
                norm2 += coefficients[i]
                    * coefficients[j]
                    * kernel.eval(&centers[i], &centers[j])?;
            }
        }
        let norm = norm2.max(0.0).sqrt();
        if norm <= 1e-12 {
            return Err(SimError::Stream("degenerate expansion (zero RKHS norm)".into()));
        }
        let scale = norm_target / norm;
        coefficients.iter_mut().for_each(|c| *c *= scale);

        Ok(Self { kernel: kernel.clone(), centers, coefficients, norm: norm_target })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.coefficients)
            .map(|(z, c)| c * self.kernel.eval(z, x).expect("dimension fixed at build"))
            .sum()
    }

    /// The exact RKHS norm of the expansion.
    pub fn rkhs_norm(&self) -> f64 {
        self.norm
    }
}

/// Parametric query path for synthetic streams.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PathSpec {
    /// Constant-speed circle; covers its circumference in 2πr/speed seconds.
    Circle { center: [f64; 2], radius: f64, speed: f64 },
    /// Straight constant-velocity sweep from `start`.
    Line { start: Vec<f64>, velocity: Vec<f64> },
}

impl PathSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            PathSpec::Circle { radius, speed, .. } => {
                if dim != 2 {
                    return Err(SimError::Validation("circle path requires dim = 2".into()));
                }
                if !(radius.is_finite() && *radius > 0.0 && speed.is_finite() && *speed > 0.0) {
                    return Err(SimError::Validation("circle needs radius > 0 and speed > 0".into()));
                }
            }
            PathSpec::Line { start, velocity } => {
                if start.len() != dim || velocity.len() != dim {
                    return Err(SimError::Validation("line start/velocity must match dim".into()));
                }
            }
        }
        Ok(())
    }

    pub fn position(&self, t: f64) -> Vec<f64> {
        match self {
            PathSpec::Circle { center, radius, speed } => {
                let theta = speed * t / radius;
                vec![center[0] + radius * theta.cos(), center[1] + radius * theta.sin()]
            }
            PathSpec::Line { start, velocity } => {
                start.iter().zip(velocity).map(|(s, v)| s + v * t).collect()
            }
        }
    }
}

/// Synthetic stream definition.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SyntheticStream {
    /// Kernel of the ground-truth expansion (usually the experts' kernel).
    pub kernel: KernelSpec,
    /// Axis-aligned box the expansion centers are drawn from.
    pub domain: Vec<(f64, f64)>,
    pub n_centers: usize,
    /// Exact RKHS norm given to the ground truth; keep ≤ the experts' Γ.
    pub norm_target: f64,
    pub path: PathSpec,
    pub sample_rate_hz: f64,
    /// Observation noise added to training targets (not to the logged truth).
    pub noise_std: f64,
    pub seed: u64,
}

/// Where the stream comes from.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StreamSource {
    Synthetic(SyntheticStream),
    /// CSV rows streamed in (optionally shuffled) order at a fixed rate.
    CsvDataset {
        path: String,
        input_cols: Vec<usize>,
        target_col: usize,
        sample_rate_hz: f64,
        /// Shuffle rows under the scenario seed before streaming.
        #[serde(default)]
        shuffle: bool,
    },
}

impl StreamSource {
    pub fn dim(&self) -> Result<usize> {
        match self {
            StreamSource::Synthetic(s) => Ok(s.kernel.dim()),
            StreamSource::CsvDataset { input_cols, .. } => {
                if input_cols.is_empty() {
                    return Err(SimError::Validation("csv stream needs input columns".into()));
                }
                Ok(input_cols.len())
            }
        }
    }

    pub fn sample_rate_hz(&self) -> f64 {
        match self {
            StreamSource::Synthetic(s) => s.sample_rate_hz,
            StreamSource::CsvDataset { sample_rate_hz, .. } => *sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StreamSource::Synthetic(s) => {
                if !(s.sample_rate_hz.is_finite() && s.sample_rate_hz > 0.0) {
                    return Err(SimError::Validation("sample rate must be > 0".into()));
                }
                if !(s.noise_std.is_finite() && s.noise_std >= 0.0) {
                    return Err(SimError::Validation("stream noise must be >= 0".into()));
                }
                if s.domain.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi >= lo)) {
                    return Err(SimError::Validation("domain bounds must be finite with hi >= lo".into()));
                }
                s.path.validate(s.kernel.dim())?;
                Ok(())
            }
            StreamSource::CsvDataset { sample_rate_hz, input_cols, .. } => {
                if !(sample_rate_hz.is_finite() && *sample_rate_hz > 0.0) {
                    return Err(SimError::Validation("sample rate must be > 0".into()));
                }
                if input_cols.is_empty() {
                    return Err(SimError::Validation("csv stream needs input columns".into()));
                }
                Ok(())
            }
        }
    }
}

/// One stream element: at time `t`, query/training input `x` with noiseless
/// target `truth` and noisy training target `y`.
#[derive(Debug, Clone)]
pub struct StreamPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub truth: f64,
    pub y: f64,
}

/// A fully materialized stream for one run.
#[derive(Debug, Clone)]
pub struct MaterializedStream {
    pub points: Vec<StreamPoint>,
    pub dim: usize,
    /// Ground-truth expansion, when the stream is synthetic.
    pub truth_fn: Option<KernelExpansion>,
}

impl MaterializedStream {
    /// Index of the stream point current at time `t` (last point with
    /// `point.t <= t`), if any.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        match self.points.binary_search_by(|p| p.t.total_cmp(&t)) {
            Ok(i) => Some(i),
            Err(0) => None,
            Err(i) => Some(i - 1),
        }
    }
}

/// Build the stream for a run of `duration_s` seconds.
pub fn materialize(source: &StreamSource, duration_s: f64, seed: u64) -> Result<MaterializedStream> {
    source.validate()?;
    match source {
        StreamSource::Synthetic(s) => {
            let expansion =
                KernelExpansion::random(&s.kernel, &s.domain, s.n_centers, s.norm_target, s.seed)?;
            let n = (duration_s * s.sample_rate_hz).floor() as usize + 1;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A_DEAD_BEEF);
            let points = (0..n)
                .map(|i| {
                    let t = i as f64 / s.sample_rate_hz;
                    let x = s.path.position(t);
                    let truth = expansion.eval(&x);
                    let noise: f64 = if s.noise_std > 0.0 {
                        let z: f64 = rand_distr::Distribution::sample(
                            &rand_distr::StandardNormal,
                            &mut rng,
                        );
                        s.noise_std * z
                    } else {
                        0.0
                    };
                    StreamPoint { t, x, truth, y: truth + noise }
                })
                .collect();
            Ok(MaterializedStream { points, dim: s.kernel.dim(), truth_fn: Some(expansion) })
        }
        StreamSource::CsvDataset { path, input_cols, target_col, sample_rate_hz, shuffle } => {
            let rows = read_csv_rows(path, input_cols, *target_col)?;
            if rows.is_empty() {
                return Err(SimError::Stream(format!("{path}: no usable rows")));
            }
            let mut order: Vec<usize> = (0..rows.len()).collect();
            if *shuffle {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                // Fisher-Yates under the scenario seed.
                for i in (1..order.len()).rev() {
                    let j = rng.random_range(0..=i);
                    order.swap(i, j);
                }
            }
            let n = ((duration_s * sample_rate_hz).floor() as usize + 1).min(rows.len());
            let points = (0..n)
                .map(|i| {
                    let (x, y) = rows[order[i]].clone();
                    StreamPoint { t: i as f64 / sample_rate_hz, x, truth: y, y }
                })
                .collect();
            Ok(MaterializedStream { points, dim: input_cols.len(), truth_fn: None })
        }
    }
}

/// Parse a CSV dataset into (inputs, target) rows, reporting the first bad
/// row with its line number.
pub fn read_csv_rows(
    path: &str,
    input_cols: &[usize],
    target_col: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| SimError::Stream(format!("{path}: {e}")))?;
    read_csv_rows_from_reader(file, path, input_cols, target_col)
}

/// Reader-based variant of [`read_csv_rows`]; `name` labels error messages.
pub fn read_csv_rows_from_reader(
    reader: impl std::io::Read,
    name: &str,
    input_cols: &[usize],
    target_col: usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let path = name;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx as u64 + 2; // 1-based, after the header
        let record = record.map_err(|e| SimError::CsvRow {
            path: path.to_string(),
            line,
            message: e.to_string(),
        })?;
        let get = |col: usize| -> Result<f64> {
            let raw = record.get(col).ok_or_else(|| SimError::CsvRow {
                path: path.to_string(),
                line,
                message: format!("missing column {col}"),
            })?;
            let v: f64 = raw.parse().map_err(|_| SimError::CsvRow {
                path: path.to_string(),
                line,
                message: format!("column {col}: `{raw}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(SimError::CsvRow {
                    path: path.to_string(),
                    line,
                    message: format!("column {col}: non-finite value"),
                });
            }
            Ok(v)
        };
        let x: Vec<f64> = input_cols.iter().map(|&c| get(c)).collect::<Result<_>>()?;
        let y = get(target_col)?;
        rows.push((x, y));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> StreamSource {
        StreamSource::Synthetic(SyntheticStream {
            kernel: KernelSpec::se(1.0, 1.0, 2).unwrap(),
            domain: vec![(-2.0, 2.0), (-2.0, 2.0)],
            n_centers: 6,
            norm_target: 1.5,
            path: PathSpec::Circle { center: [0.0, 0.0], radius: 1.0, speed: 0.5 },
            sample_rate_hz: 50.0,
            noise_std: 0.05,
            seed: 3,
        })
    }

    #[test]
    fn expansion_norm_is_exact() {
        let k = KernelSpec::se(1.0, 1.0, 2).unwrap();
        let e = KernelExpansion::random(&k, &[(-1.0, 1.0), (-1.0, 1.0)], 8, 2.0, 11).unwrap();
        // Recompute a^T K a from the public pieces.
        assert!((e.rkhs_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn materialized_stream_is_deterministic() {
        let a = materialize(&synthetic(), 1.0, 42).unwrap();
        let b = materialize(&synthetic(), 1.0, 42).unwrap();
        assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.x, q.x);
            assert_eq!(p.y, q.y);
        }
    }

    #[test]
    fn index_at_returns_latest_point() {
        let s = materialize(&synthetic(), 1.0, 42).unwrap();
        assert_eq!(s.index_at(-0.1), None);
        assert_eq!(s.index_at(0.0), Some(0));
        // 50 Hz: at t = 0.101 the current sample is index 5.
        assert_eq!(s.index_at(0.101), Some(5));
    }

    #[test]
    fn csv_rows_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "a,b,y\n1.0,2.0,3.0\n4.0,oops,6.0\n").unwrap();
        let err = read_csv_rows(path.to_str().unwrap(), &[0, 1], 2).unwrap_err();
        match err {
            SimError::CsvRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_stream_materializes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "a,b,y\n1.0,2.0,3.0\n4.0,5.0,6.0\n7.0,8.0,9.0\n").unwrap();
        let src = StreamSource::CsvDataset {
            path: path.to_str().unwrap().to_string(),
            input_cols: vec![0, 1],
            target_col: 2,
            sample_rate_hz: 10.0,
            shuffle: false,
        };
        let s = materialize(&src, 10.0, 1).unwrap();
        assert_eq!(s.points.len(), 3);
        assert_eq!(s.points[1].x, vec![4.0, 5.0]);
        assert_eq!(s.points[1].y, 6.0);
        assert_eq!(s.points[1].t, 0.1);
    }
}
