//! Conductivity phantoms on the unit disk: random families (sharp shapes,
//! three-phase inclusions, smooth lognormal fields) and a deterministic
//! heart-and-lungs layout.
//!
//! Every field equals 1 in a collar near the boundary circle — the forward
//! map only sees contrasts strictly inside `support_radius` — and is strictly
//! positive. Random families are pure functions of `(seed, n)`: hyperparameters
//! come from one derived stream (draw order is part of the format and is
//! documented per family), level-set fields from further derived streams.

use crate::error::{Error, Result};
use crate::grf::{sample_grf, GrfSpec};
use crate::grid::{DiskGrid, SquareField};
use crate::seeds::{self, tags};
use rand::Rng;

/// A conductivity map sampled at cell centers, together with the radius
/// outside which it is identically 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    pub field: SquareField,
    pub support_radius: f64,
}

impl ConductivityField {
    pub fn new(field: SquareField, support_radius: f64) -> Self {
        ConductivityField { field, support_radius }
    }

    pub fn n(&self) -> usize {
        self.field.n
    }

    /// Check positivity and the unit collar; used by tests and the dataset
    /// generator as a tripwire, not by hot paths.
    pub fn validate(&self) -> Result<()> {
        let n = self.field.n;
        let grid = DiskGrid::new(n);
        for i in 0..n {
            for j in 0..n {
                let v = self.field.at(i, j);
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::invalid(format!(
                        "conductivity at ({i},{j}) is {v}; must be finite and positive"
                    )));
                }
                if grid.radius(i, j) >= self.support_radius && v != 1.0 {
                    return Err(Error::invalid(format!(
                        "conductivity at ({i},{j}) is {v} outside the support radius {}",
                        self.support_radius
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Smooth transition ρ(t): 1 on [0, r−], a tanh blend decaying to `w` on
/// (r−, r+], 0 beyond r+. λ controls the blend steepness. The blend is
/// (1+w)/2 + (1−w)/2·tanh(((t−r−)⁻¹ + (t−r+)⁻¹)/λ), which tends to 1 at r−⁺
/// and to w at r+⁻; the removable endpoint t = r+ is set to w directly.
pub fn cutoff_fn(t: f64, w: f64, lambda: f64, r_minus: f64, r_plus: f64) -> f64 {
    debug_assert!(0.0 < r_minus && r_minus < r_plus);
    if t <= r_minus {
        1.0
    } else if t < r_plus {
        let arg = ((t - r_minus).recip() + (t - r_plus).recip()) / lambda;
        0.5 * (1.0 + w) + 0.5 * (1.0 - w) * arg.tanh()
    } else if t == r_plus {
        w
    } else {
        0.0
    }
}

pub const SHAPE_RADIUS: f64 = 0.7;
pub const SHAPE_CONTRAST: f64 = 100.0;

/// Threshold a level-set field: `contrast` on {u ≥ 0} ∩ B_radius, 1 elsewhere.
pub fn shape_from_field(u: &SquareField, radius: f64, contrast: f64) -> ConductivityField {
    let n = u.n;
    let grid = DiskGrid::new(n);
    let mut values = vec![1.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            if grid.radius(i, j) < radius && u.at(i, j) >= 0.0 {
                values[i * n + j] = contrast;
            }
        }
    }
    ConductivityField::new(SquareField::new(n, values), radius)
}

/// Sharp random inclusion: level set of a GRF with τ = 20, α = 4.5, clipped
/// to B_{0.7}, at contrast 100.
pub fn sample_shape(seed: u64, n: usize) -> ConductivityField {
    let spec = GrfSpec::full(20.0, 4.5, n).expect("fixed shape GRF spec is valid");
    let u = sample_grf(&spec, seeds::derive(seed, &[tags::FIELD, 0]));
    shape_from_field(&u, SHAPE_RADIUS, SHAPE_CONTRAST)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePhaseParams {
    pub tau: f64,
    pub alpha: f64,
    pub radius: f64,
    pub high: f64,
    pub low: f64,
}

/// Hyperparameters for the three-phase family. Draw order (fixed): τ ~ U[12,18],
/// α ~ U[4,5], radius ~ U[0.65,0.9], high ~ U[2,10], low ~ U[0.1,0.5].
pub fn three_phase_params(rng: &mut impl Rng) -> ThreePhaseParams {
    let mut uniform = |a: f64, b: f64| a + (b - a) * rng.gen::<f64>();
    ThreePhaseParams {
        tau: uniform(12.0, 18.0),
        alpha: uniform(4.0, 5.0),
        radius: uniform(0.65, 0.9),
        high: uniform(2.0, 10.0),
        low: uniform(0.1, 0.5),
    }
}

/// Combine two level-set fields: inside B_radius, the region {u1 ≥ 0} splits
/// into `high` (where u2 ≥ 0) and `low` (where u2 < 0); {u1 < 0} stays 1.
pub fn three_phase_from_fields(
    u1: &SquareField,
    u2: &SquareField,
    params: &ThreePhaseParams,
) -> ConductivityField {
    assert_eq!(u1.n, u2.n);
    let n = u1.n;
    let grid = DiskGrid::new(n);
    let mut values = vec![1.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            if grid.radius(i, j) < params.radius && u1.at(i, j) >= 0.0 {
                values[i * n + j] = if u2.at(i, j) >= 0.0 { params.high } else { params.low };
            }
        }
    }
    ConductivityField::new(SquareField::new(n, values), params.radius)
}

/// Random piecewise-constant field with two contrasts against a unit
/// background, built from two independent GRF level sets sharing drawn
/// hyperparameters.
pub fn sample_three_phase(seed: u64, n: usize) -> ConductivityField {
    let mut hyper = seeds::stream(seeds::derive(seed, &[tags::HYPER]));
    let params = three_phase_params(&mut hyper);
    let spec = GrfSpec::full(params.tau, params.alpha, n).expect("drawn ranges are valid");
    let u1 = sample_grf(&spec, seeds::derive(seed, &[tags::FIELD, 0]));
    let u2 = sample_grf(&spec, seeds::derive(seed, &[tags::FIELD, 1]));
    three_phase_from_fields(&u1, &u2, &params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LognormalParams {
    pub tau: f64,
    pub alpha: f64,
    pub r_minus: f64,
    pub r_plus: f64,
    pub lambda: f64,
}

/// Hyperparameters for the lognormal family. Draw order (fixed): τ ~ U[7,9],
/// α ~ U[3,4], r− ~ U[0.50,0.55], r+ ~ U[0.85,0.95], λ ~ U[7.5,8.5].
pub fn lognormal_params(rng: &mut impl Rng) -> LognormalParams {
    let mut uniform = |a: f64, b: f64| a + (b - a) * rng.gen::<f64>();
    LognormalParams {
        tau: uniform(7.0, 9.0),
        alpha: uniform(3.0, 4.0),
        r_minus: uniform(0.50, 0.55),
        r_plus: uniform(0.85, 0.95),
        lambda: uniform(7.5, 8.5),
    }
}

/// Pointwise lognormal conductivity: exp(u) inside r−, blended toward 1
/// across the annulus (r−, r+) with a weight that lands exactly on 1 at r+,
/// and 1 outside. Continuous in `radius` for fixed u.
pub fn lognormal_value(u: f64, radius: f64, params: &LognormalParams) -> f64 {
    if radius >= params.r_plus {
        return 1.0;
    }
    let v = u.exp();
    v * cutoff_fn(radius, v.recip(), params.lambda, params.r_minus, params.r_plus)
}

pub fn lognormal_from_field(u: &SquareField, params: &LognormalParams) -> ConductivityField {
    let n = u.n;
    let grid = DiskGrid::new(n);
    let mut values = vec![1.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = lognormal_value(u.at(i, j), grid.radius(i, j), params);
        }
    }
    ConductivityField::new(SquareField::new(n, values), params.r_plus)
}

/// Smooth random field exp(u) feathered to 1 near the boundary.
pub fn sample_lognormal(seed: u64, n: usize) -> ConductivityField {
    let mut hyper = seeds::stream(seeds::derive(seed, &[tags::HYPER]));
    let params = lognormal_params(&mut hyper);
    let spec = GrfSpec::full(params.tau, params.alpha, n).expect("drawn ranges are valid");
    let u = sample_grf(&spec, seeds::derive(seed, &[tags::FIELD, 0]));
    lognormal_from_field(&u, &params)
}

/// Axis-aligned-then-rotated ellipse with a constant conductivity value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    pub rotation_deg: f64,
    pub value: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let phi = self.rotation_deg.to_radians();
        let (s, c) = phi.sin_cos();
        let ex = c * dx + s * dy;
        let ey = -s * dx + c * dy;
        let (a, b) = self.semi_axes;
        (ex / a).powi(2) + (ey / b).powi(2) <= 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhantomKind {
    /// Physiological contrasts: conductive heart (6.3), resistive lungs (0.4).
    Realistic,
    /// All organs at contrast 100, matching the sharp-shape training family.
    ShapeContrast,
}

impl PhantomKind {
    pub fn name(&self) -> &'static str {
        match self {
            PhantomKind::Realistic => "realistic",
            PhantomKind::ShapeContrast => "shape_contrast",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "realistic" => Ok(PhantomKind::Realistic),
            "shape_contrast" => Ok(PhantomKind::ShapeContrast),
            other => Err(Error::invalid(format!(
                "unknown phantom kind {other:?} (expected realistic or shape_contrast)"
            ))),
        }
    }
}

/// The fixed heart-and-lungs layout: one tilted ellipse per lung, one for
/// the heart, all inside B_{0.7}.
pub fn phantom_ellipses(kind: PhantomKind) -> [Ellipse; 3] {
    let (heart, lung) = match kind {
        PhantomKind::Realistic => (6.3, 0.4),
        PhantomKind::ShapeContrast => (100.0, 100.0),
    };
    [
        Ellipse { center: (0.1, 0.25), semi_axes: (0.18, 0.25), rotation_deg: 0.0, value: heart },
        Ellipse { center: (0.35, -0.05), semi_axes: (0.22, 0.42), rotation_deg: -25.0, value: lung },
        Ellipse { center: (-0.35, -0.05), semi_axes: (0.22, 0.42), rotation_deg: 25.0, value: lung },
    ]
}

pub fn phantom(kind: PhantomKind, n: usize) -> ConductivityField {
    let ellipses = phantom_ellipses(kind);
    let grid = DiskGrid::new(n);
    let mut values = vec![1.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            let (x, y) = grid.center(i, j);
            for e in &ellipses {
                if e.contains(x, y) {
                    values[i * n + j] = e.value;
                    break;
                }
            }
        }
    }
    ConductivityField::new(SquareField::new(n, values), SHAPE_RADIUS)
}

/// The random conductivity families used for dataset generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Shape,
    ThreePhase,
    Lognormal,
}

impl Family {
    pub fn sample(&self, seed: u64, n: usize) -> ConductivityField {
        match self {
            Family::Shape => sample_shape(seed, n),
            Family::ThreePhase => sample_three_phase(seed, n),
            Family::Lognormal => sample_lognormal(seed, n),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Shape => "shape",
            Family::ThreePhase => "three_phase",
            Family::Lognormal => "lognormal",
        }
    }

    pub const ALL: [Family; 3] = [Family::Shape, Family::ThreePhase, Family::Lognormal];
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shape" => Ok(Family::Shape),
            "three_phase" | "three-phase" => Ok(Family::ThreePhase),
            "lognormal" => Ok(Family::Lognormal),
            other => Err(Error::invalid(format!(
                "unknown conductivity family {other:?}; expected shape, three_phase, or lognormal"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cutoff_endpoints_and_monotonicity() {
        let (w, lambda, rm, rp) = (0.25, 8.0, 0.5, 0.9);
        assert_eq!(cutoff_fn(0.0, w, lambda, rm, rp), 1.0);
        assert_eq!(cutoff_fn(rm, w, lambda, rm, rp), 1.0);
        assert_eq!(cutoff_fn(rp, w, lambda, rm, rp), w);
        assert_eq!(cutoff_fn(rp + 1e-12, w, lambda, rm, rp), 0.0);
        assert_eq!(cutoff_fn(2.0, w, lambda, rm, rp), 0.0);

        // Approach the endpoints from inside the blend interval.
        assert_relative_eq!(cutoff_fn(rm + 1e-6, w, lambda, rm, rp), 1.0, epsilon = 1e-9);
        assert_relative_eq!(cutoff_fn(rp - 1e-6, w, lambda, rm, rp), w, epsilon = 1e-9);

        let mut prev = 1.0;
        for step in 1..400 {
            let t = rm + (rp - rm) * step as f64 / 400.0;
            let v = cutoff_fn(t, w, lambda, rm, rp);
            assert!(v <= prev + 1e-12, "not monotone at t = {t}");
            prev = v;
        }
    }

    #[test]
    fn shape_is_binary_and_supported() {
        let n = 48;
        let field = sample_shape(77, n);
        assert_eq!(field, sample_shape(77, n));
        field.validate().unwrap();
        assert_eq!(field.support_radius, SHAPE_RADIUS);

        let grid = DiskGrid::new(n);
        let mut inclusion_cells = 0usize;
        for i in 0..n {
            for j in 0..n {
                let v = field.field.at(i, j);
                assert!(v == 1.0 || v == SHAPE_CONTRAST);
                if v == SHAPE_CONTRAST {
                    inclusion_cells += 1;
                    assert!(grid.radius(i, j) < SHAPE_RADIUS);
                }
            }
        }
        // A level set of a mean-zero field covers roughly half of B_{0.7};
        // just require it be non-trivially present.
        assert!(inclusion_cells > 0, "empty inclusion for this seed");
    }

    #[test]
    fn three_phase_draw_ranges_and_values() {
        let n = 48;
        for seed in 0..12u64 {
            let mut hyper = seeds::stream(seeds::derive(seed, &[tags::HYPER]));
            let p = three_phase_params(&mut hyper);
            assert!((12.0..18.0).contains(&p.tau));
            assert!((4.0..5.0).contains(&p.alpha));
            assert!((0.65..0.9).contains(&p.radius));
            assert!((2.0..10.0).contains(&p.high));
            assert!((0.1..0.5).contains(&p.low));

            let field = sample_three_phase(seed, n);
            field.validate().unwrap();
            assert_eq!(field.support_radius, p.radius);
            for i in 0..n {
                for j in 0..n {
                    let v = field.field.at(i, j);
                    assert!(
                        v == 1.0 || v == p.high || v == p.low,
                        "unexpected value {v} (seed {seed})"
                    );
                }
            }
        }
    }

    #[test]
    fn lognormal_is_smooth_across_the_annulus() {
        let params = LognormalParams {
            tau: 8.0,
            alpha: 3.5,
            r_minus: 0.52,
            r_plus: 0.9,
            lambda: 8.0,
        };
        // Fixed u: scan radius finely; adjacent samples must differ by O(step),
        // i.e. no jumps at r− or r+.
        let u = 1.3;
        let steps = 4000;
        let mut prev = lognormal_value(u, 0.0, &params);
        for s in 1..=steps {
            let r = 1.2 * s as f64 / steps as f64;
            let v = lognormal_value(u, r, &params);
            assert!(
                (v - prev).abs() < 0.02,
                "jump {} at r = {r}",
                (v - prev).abs()
            );
            prev = v;
        }
        // Endpoint identities: exp(u) inside, 1 at and beyond r+.
        assert_relative_eq!(lognormal_value(u, 0.3, &params), u.exp());
        assert_relative_eq!(lognormal_value(u, params.r_plus, &params), 1.0);
        assert_eq!(lognormal_value(u, 1.0, &params), 1.0);
    }

    #[test]
    fn lognormal_samples_validate() {
        let n = 48;
        for seed in 0..6u64 {
            let field = sample_lognormal(seed, n);
            assert_eq!(field, sample_lognormal(seed, n));
            field.validate().unwrap();
            assert!(field.support_radius >= 0.85 && field.support_radius < 0.95);
        }
    }

    #[test]
    fn phantom_geometry() {
        let n = 128;
        let realistic = phantom(PhantomKind::Realistic, n);
        realistic.validate().unwrap();
        let contrast = phantom(PhantomKind::ShapeContrast, n);
        contrast.validate().unwrap();

        let grid = DiskGrid::new(n);
        let mut heart = 0usize;
        let mut lungs = 0usize;
        for i in 0..n {
            for j in 0..n {
                let v = realistic.field.at(i, j);
                if v == 6.3 {
                    heart += 1;
                } else if v == 0.4 {
                    lungs += 1;
                } else {
                    assert_eq!(v, 1.0);
                }
                // Organs stay inside the support collar.
                if v != 1.0 {
                    assert!(grid.radius(i, j) < SHAPE_RADIUS);
                    assert_eq!(contrast.field.at(i, j), 100.0);
                }
            }
        }
        // Areas: heart π·0.18·0.25 ≈ 0.141 (painted first, unobstructed);
        // lungs 2·π·0.22·0.42 ≈ 0.581 minus a small graze with the heart.
        let cell = grid.cell_area();
        assert_relative_eq!(heart as f64 * cell, 0.141, max_relative = 0.08);
        assert_relative_eq!(lungs as f64 * cell, 0.581, max_relative = 0.10);

        // Lungs are mirror images up to the (asymmetric) heart painted on
        // top: the mirror of a lung pixel is lung or heart, never background.
        for i in 0..n {
            for j in 0..n {
                if realistic.field.at(i, j) == 0.4 {
                    let m = realistic.field.at(n - 1 - i, j);
                    assert!(m == 0.4 || m == 6.3, "mirror of lung pixel is {m}");
                }
            }
        }
    }

    #[test]
    fn family_round_trips_names() {
        for fam in Family::ALL {
            assert_eq!(fam.name().parse::<Family>().unwrap(), fam);
        }
        assert!("blancmange".parse::<Family>().is_err());
    }
}
