//! Pattern recognition for the array: identifies which gas produced a
//! five-sensor Rs/Ro fingerprint and estimates its concentration by
//! fitting the per-gas response curves in log space.

use crate::gas::{steady_state_ratio, GasError, GasMixture, GasSpecies, SensorSpec};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("fingerprint must be exactly 5 ratios in (0, 1], got {0}")]
    MalformedVector(String),
    #[error(transparent)]
    Gas(#[from] GasError),
}

/// The sensor specs for the full array, in fixed array order. The
/// per-gas response curves used for fitting come straight from these
/// specs, so library predictions match the sensor model exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintLibrary {
    specs: [SensorSpec; 5],
}

impl FingerprintLibrary {
    pub fn new(specs: [SensorSpec; 5]) -> Result<FingerprintLibrary, ClassifierError> {
        for spec in &specs {
            spec.validate()?;
        }
        Ok(FingerprintLibrary { specs })
    }

    pub fn with_default_pack() -> FingerprintLibrary {
        FingerprintLibrary {
            specs: crate::gas::default_sensor_pack(),
        }
    }

    pub fn specs(&self) -> &[SensorSpec; 5] {
        &self.specs
    }
}

/// Thresholds and search bounds for classification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    /// Best-fit residual above which the sample is reported Unknown.
    pub residual_threshold: f64,
    /// Fitted concentrations below this floor are reported Unknown, ppm.
    pub c_min: f64,
    /// Scale of the confidence mapping exp(-residual / scale).
    pub residual_scale: f64,
    /// Upper bound of the concentration search, ppm.
    pub c_max: f64,
    /// Points in the coarse log-spaced search grid.
    pub grid_points: usize,
    /// Lower bound of the concentration search, ppm.
    pub c_floor: f64,
}

impl Default for ClassifyOptions {
    fn default() -> ClassifyOptions {
        ClassifyOptions {
            residual_threshold: 0.15,
            c_min: 10.0,
            residual_scale: 0.05,
            c_max: 1e5,
            grid_points: 200,
            c_floor: 0.1,
        }
    }
}

/// Outcome of classifying one fingerprint. `species` is None for an
/// Unknown verdict, in which case the concentration is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationResult {
    pub species: Option<GasSpecies>,
    pub concentration: f64,
    /// Root-mean-square log-space misfit of the winning curve.
    pub residual: f64,
    pub confidence: f64,
}

/// Predicted Rs/Ro of every sensor for a single gas at concentration c.
pub fn predict_ratios(lib: &FingerprintLibrary, species: GasSpecies, c: f64) -> [f64; 5] {
    let mix = GasMixture::single(species, c).expect("concentration must be finite and >= 0");
    let mut out = [0.0; 5];
    for (i, spec) in lib.specs.iter().enumerate() {
        out[i] = steady_state_ratio(spec, &mix);
    }
    out
}

fn log_misfit(lib: &FingerprintLibrary, species: GasSpecies, observed: &[f64; 5], c: f64) -> f64 {
    let predicted = predict_ratios(lib, species, c);
    observed
        .iter()
        .zip(&predicted)
        .map(|(o, p)| {
            let d = o.ln() - p.ln();
            d * d
        })
        .sum()
}

const INV_PHI: f64 = 0.618_033_988_749_894_8; // (sqrt(5) - 1) / 2

/// Golden-section minimization of `f` on [a, b] to absolute tolerance
/// `tol` on the argument.
fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Best-fit concentration for one candidate species: minimizes the
/// summed squared log-ratio misfit over a coarse log-spaced grid, then
/// refines with golden-section search to a relative tolerance of 1e-6.
/// Returns the arg-min and the RMS residual sqrt(L / 5).
pub fn fit_concentration(
    lib: &FingerprintLibrary,
    species: GasSpecies,
    observed: &[f64; 5],
) -> (f64, f64) {
    let opts = ClassifyOptions::default();
    fit_concentration_with(lib, species, observed, &opts)
}

pub fn fit_concentration_with(
    lib: &FingerprintLibrary,
    species: GasSpecies,
    observed: &[f64; 5],
    opts: &ClassifyOptions,
) -> (f64, f64) {
    let lo = opts.c_floor.log10();
    let hi = opts.c_max.log10();
    let n = opts.grid_points.max(2);
    let step = (hi - lo) / (n - 1) as f64;

    let loss_log = |x: f64| log_misfit(lib, species, observed, 10f64.powf(x));

    let mut best_i = 0;
    let mut best_l = f64::INFINITY;
    for i in 0..n {
        let l = loss_log(lo + i as f64 * step);
        if l < best_l {
            best_l = l;
            best_i = i;
        }
    }
    let a = lo + (best_i.saturating_sub(1)) as f64 * step;
    let b = (lo + (best_i + 1) as f64 * step).min(hi);
    // relative tolerance 1e-6 on c equals log10(1 + 1e-6) on the exponent
    let tol = (1f64 + 1e-6).log10();
    let x = golden_section_min(loss_log, a, b, tol);
    let c = 10f64.powf(x);
    let l = log_misfit(lib, species, observed, c);
    (c, (l / 5.0).sqrt())
}

/// Fit all five candidate gases, pick the smallest residual (ties
/// broken by lowest species code), and apply the Unknown thresholds.
pub fn classify(
    lib: &FingerprintLibrary,
    observed: &[f64],
    opts: &ClassifyOptions,
) -> Result<ClassificationResult, ClassifierError> {
    if observed.len() != 5 {
        return Err(ClassifierError::MalformedVector(format!(
            "{} elements",
            observed.len()
        )));
    }
    let mut fingerprint = [0.0; 5];
    for (i, &r) in observed.iter().enumerate() {
        if !(r > 0.0 && r <= 1.0) {
            return Err(ClassifierError::MalformedVector(format!(
                "element {} is {}",
                i, r
            )));
        }
        fingerprint[i] = r;
    }

    let mut best: Option<(GasSpecies, f64, f64)> = None;
    for species in GasSpecies::ALL {
        let (c, residual) = fit_concentration_with(lib, species, &fingerprint, opts);
        // strict < keeps the lowest species code on ties
        if best.map_or(true, |(_, _, r)| residual < r) {
            best = Some((species, c, residual));
        }
    }
    let (species, c, residual) = best.expect("five fits always produce a winner");
    let confidence = (-residual / opts.residual_scale).exp();

    if residual > opts.residual_threshold || c < opts.c_min {
        return Ok(ClassificationResult {
            species: None,
            concentration: 0.0,
            residual,
            confidence,
        });
    }
    Ok(ClassificationResult {
        species: Some(species),
        concentration: c,
        residual,
        confidence,
    })
}

/// Render a result as the single-row report CSV:
/// `species,concentration_ppm,residual,confidence`.
pub fn classification_csv(result: &ClassificationResult) -> String {
    let mut out = String::from("species,concentration_ppm,residual,confidence\n");
    out.push_str(&format!(
        "{},{},{},{}\n",
        result.species.map(|s| s.name()).unwrap_or("Unknown"),
        result.concentration,
        result.residual,
        result.confidence
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lib() -> FingerprintLibrary {
        FingerprintLibrary::with_default_pack()
    }

    /// Brute-force grid oracle for fit_concentration, independent of the
    /// grid + golden-section path.
    fn brute_force_fit(
        lib: &FingerprintLibrary,
        species: GasSpecies,
        observed: &[f64; 5],
        points: usize,
    ) -> (f64, f64) {
        let lo = 0.1f64.log10();
        let hi = 1e5f64.log10();
        let mut best_c = 0.1;
        let mut best_l = f64::INFINITY;
        for i in 0..points {
            let c = 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64);
            let l = log_misfit(lib, species, observed, c);
            if l < best_l {
                best_l = l;
                best_c = c;
            }
        }
        (best_c, (best_l / 5.0).sqrt())
    }

    #[test]
    fn predict_clean_air_is_all_ones() {
        assert_eq!(predict_ratios(&lib(), GasSpecies::Methane, 0.0), [1.0; 5]);
    }

    #[test]
    fn predict_delegates_to_sensor_model() {
        let lib = lib();
        let c = 750.0;
        let mix = GasMixture::single(GasSpecies::Propane, c).unwrap();
        let v = predict_ratios(&lib, GasSpecies::Propane, c);
        for (i, spec) in lib.specs().iter().enumerate() {
            assert_eq!(v[i], steady_state_ratio(spec, &mix));
        }
    }

    #[test]
    fn methane_fingerprint_dips_at_tgs813() {
        let v = predict_ratios(&lib(), GasSpecies::Methane, 100.0);
        let min_idx = v
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(min_idx, 3); // TGS813 position
    }

    #[test]
    fn fit_recovers_exact_sample() {
        let lib = lib();
        let observed = predict_ratios(&lib, GasSpecies::Methane, 500.0);
        let (c, residual) = fit_concentration(&lib, GasSpecies::Methane, &observed);
        assert!((c - 500.0).abs() / 500.0 < 0.001, "fit {} ppm", c);
        assert!(residual < 1e-6);
        // cross-check against the brute-force oracle
        let (c_oracle, _) = brute_force_fit(&lib, GasSpecies::Methane, &observed, 1_000_000);
        assert!((c - c_oracle).abs() / c_oracle < 0.001);
    }

    #[test]
    fn all_ones_fits_to_lower_bound() {
        let lib = lib();
        let observed = [1.0; 5];
        let (c, residual) = fit_concentration(&lib, GasSpecies::Hydrogen, &observed);
        assert!(c < 0.2, "expected the lower bound, got {} ppm", c);
        // at the 0.1 ppm search floor the curves still predict a tiny
        // response, so the misfit is small but not zero
        assert!(residual < 0.05, "residual {}", residual);
    }

    #[test]
    fn wrong_species_fits_worse() {
        let lib = lib();
        let observed = predict_ratios(&lib, GasSpecies::Ethanol, 800.0);
        let (_, res_ethanol) = fit_concentration(&lib, GasSpecies::Ethanol, &observed);
        let (_, res_hydrogen) = fit_concentration(&lib, GasSpecies::Hydrogen, &observed);
        assert!(res_hydrogen > res_ethanol);
    }

    #[test]
    fn classify_noiseless_methane() {
        let lib = lib();
        let observed = predict_ratios(&lib, GasSpecies::Methane, 500.0);
        let result = classify(&lib, &observed, &ClassifyOptions::default()).unwrap();
        assert_eq!(result.species, Some(GasSpecies::Methane));
        assert!((result.concentration - 500.0).abs() / 500.0 < 0.005);
        assert!(result.confidence > 0.99);
    }

    #[test]
    fn classify_clean_air_is_unknown() {
        let result = classify(&lib(), &[1.0; 5], &ClassifyOptions::default()).unwrap();
        assert_eq!(result.species, None);
        assert_eq!(result.concentration, 0.0);
    }

    #[test]
    fn classify_rejects_wrong_shape() {
        assert!(matches!(
            classify(&lib(), &[0.5; 4], &ClassifyOptions::default()),
            Err(ClassifierError::MalformedVector(_))
        ));
        assert!(matches!(
            classify(&lib(), &[0.5, 0.5, 0.5, 0.5, 1.5], &ClassifyOptions::default()),
            Err(ClassifierError::MalformedVector(_))
        ));
    }

    #[test]
    fn classify_is_deterministic() {
        let lib = lib();
        let observed = predict_ratios(&lib, GasSpecies::Isobutane, 321.0);
        let a = classify(&lib, &observed, &ClassifyOptions::default()).unwrap();
        let b = classify(&lib, &observed, &ClassifyOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn common_mode_drift_keeps_the_winner() {
        let lib = lib();
        let opts = ClassifyOptions::default();
        for species in GasSpecies::ALL {
            for &c in &[100.0, 500.0, 2000.0] {
                let observed = predict_ratios(&lib, species, c);
                for &k in &[0.99, 1.0, 1.01] {
                    let drifted: Vec<f64> =
                        observed.iter().map(|r| (r * k).min(1.0)).collect();
                    let result = classify(&lib, &drifted, &opts).unwrap();
                    assert_eq!(result.species, Some(species), "k={} c={}", k, c);
                }
            }
        }
    }

    #[test]
    fn classification_csv_row() {
        let result = ClassificationResult {
            species: Some(GasSpecies::Methane),
            concentration: 500.0,
            residual: 0.0,
            confidence: 1.0,
        };
        assert_eq!(
            classification_csv(&result),
            "species,concentration_ppm,residual,confidence\nMethane,500,0,1\n"
        );
    }
}
