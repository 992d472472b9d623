use lagflow::flow::{FlowState, StepControl, Workspace, step_auto};
use lagflow::torusmap::{Shear, ShearAxis, ShearSpec, TorusMap, TrigPoly};

fn main() {
    let spec = ShearSpec { shears: vec![
        Shear { axis: ShearAxis::Y, amplitude: 0.2, profile: TrigPoly::sin_wave(1, 1.0) },
        Shear { axis: ShearAxis::X, amplitude: 0.15, profile: TrigPoly::cos_wave(1, 1.0) },
    ]};
    for t_target in [0.05f64, 1.0] {
        let mut drifts = Vec::new();
        for n in [32usize, 64] {
            let map = TorusMap::from_shears(&spec, n).unwrap();
            let mut st = FlowState::new(map);
            let mut ws = Workspace::new(n);
            while t_target - st.t() > 1e-12 {
                step_auto(&mut st, &StepControl::default(), t_target, &mut ws).unwrap();
            }
            drifts.push(st.map().det_drift());
        }
        println!("t={t_target}: drift32={:.3e} drift64={:.3e} ratio={:.1}", drifts[0], drifts[1], drifts[0]/drifts[1]);
    }
}
