use eulerlab_core::energy::*;
use eulerlab_core::grid::PeriodicGrid;
use eulerlab_core::oscillation::build_wave;
use eulerlab_core::pressure::PressureLaw;
use eulerlab_core::schedule::{DensitySchedule, Rho0Spec};
use eulerlab_core::subsolution::Subsolution;
use std::sync::Arc;

fn main() {
    let grid = PeriodicGrid::new(2, 32).unwrap();
    let spec = Rho0Spec::single_mode(1.0, [1, 0, 0], 0.08);
    let schedule = Arc::new(DensitySchedule::new(grid, &spec, 1.0).unwrap());
    let law = Arc::new(PressureLaw::power(2.0).unwrap());
    let ctx = Arc::new(ProfileContext::new(schedule, law).unwrap());
    let prof = Arc::new(choose_chi(ctx, 0.01, 512).unwrap());
    let sub = Subsolution::trivial(prof.clone()).unwrap();
    let inc = build_wave(grid, 0, 1, 8, 0.4, 9, &|_| 0.8, (0.85, 0.95)).unwrap();
    let sub1 = sub.extended(Arc::new(inc)).unwrap();
    for t in [0.86f64, 0.9, 0.94] {
        let corr = sub1.corrector_bound(t);
        let exact = sub1.margin_field(t).unwrap().min();
        let fast = sub1.margin_probe_min(&[t]).unwrap();
        println!("t={t}: corr={corr:.4e} exact={exact:.4} fast={fast:.4} e={:.4}", prof.energy_value(t, 0));
    }
}
