use qlbe::brownian::{cl_coefficients, linear_fit, max_stable_wigner_dt, wigner_kramers_evolve, PhaseSpaceField};
use qlbe::generator::EvolutionConfig;
use qlbe::model::{GasModel, ParticleModel};

// Overdamped regime: the spatial variance grows at 2(1/(βMη) + D_xx).
#[test]
fn strong_friction_spatial_diffusion() {
    let gas = GasModel::new(1.0, 1.0, 0.1).unwrap();
    let particle = ParticleModel::new(1.0).unwrap();
    let c = cl_coefficients(4.0, &gas, &particle).unwrap();
    let expected = c.strong_friction_diffusion(&particle);

    let field = PhaseSpaceField::gaussian(-8.0, 0.025, 640, 0.25, 24, (0.0, 0.0), (0.09, 1.0)).unwrap();
    let dt = max_stable_wigner_dt(&c, &particle, &field);
    let every = (0.1 / dt).ceil() as usize;
    let out = wigner_kramers_evolve(&c, &particle, &field, &EvolutionConfig::new(dt, 3.0, every).unwrap()).unwrap();
    let (t, v): (Vec<f64>, Vec<f64>) = out
        .iter()
        .filter(|s| s.time >= 1.0 - 1e-9)
        .map(|s| (s.time, s.field.var_x()))
        .unzip();
    assert!(t.len() >= 5);
    let (slope, _, r2) = linear_fit(&t, &v).unwrap();
    let d = slope / 2.0;
    assert!(r2 > 0.999, "r2 {r2}");
    assert!((d / expected - 1.0).abs() < 0.05, "D {d} vs {expected}");
}
