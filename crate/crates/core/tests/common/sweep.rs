use electroseis::em::InitialField;
use electroseis::field::{Field3, VecField};
use electroseis::grid::{build_domain, Domain, Grid, Resolution};
use electroseis::params::{Bump, ParameterFields, ScalarSpec, UniformParams};
use electroseis::pipeline::{shared_grid, SolverSettings};
use electroseis::stability::SweepSetup;

pub fn bump(g: &Grid, amp: f64, c: [f64; 3]) -> Field3 {
    ScalarSpec::constant(0.0)
        .with_bump(Bump::Compact {
            amp,
            center: c,
            radius: 0.2,
        })
        .sample(g)
}

pub struct Case {
    pub grid: Grid,
    pub base: ParameterFields,
    pub pert: [Field3; 4],
    pub init: [(VecField, VecField); 2],
}

pub fn case(n: usize, final_time: f64) -> Case {
    let g0 = build_domain(
        Domain::unit_cube(0.25, final_time, 0.5 * final_time),
        Resolution {
            n: [n; 3],
            dt_max: None,
        },
    )
    .unwrap()
    .1;
    let v = UniformParams {
        electrokinetic: 0.5,
        sigma: 0.2,
        ..Default::default()
    };
    let base = ParameterFields::uniform(g0.node_dims(), &v).unwrap();
    let pert = [
        bump(&g0, 0.4, [0.5; 3]),
        bump(&g0, 0.3, [0.45, 0.55, 0.5]),
        bump(&g0, 0.6, [0.55, 0.45, 0.5]),
        bump(&g0, 0.5, [0.5, 0.5, 0.45]),
    ];
    let p2 = base.with_em_increments(&pert[0], &pert[1], &pert[2], &pert[3]).unwrap();
    let g = shared_grid(&g0, final_time, &[&base, &p2], &SolverSettings::default()).unwrap();
    let c = |v: [f64; 3]| InitialField::Constant(v);
    let init = [
        (c([0.0, 1.0, 0.0]).edge_field(&g), c([1.0, 0.0, 0.0]).face_field(&g)),
        (c([0.0, 0.0, 1.0]).edge_field(&g), c([0.0, 0.0, 1.0]).face_field(&g)),
    ];
    Case { grid: g, base, pert, init }
}

impl Case {
    pub fn setup(&self) -> SweepSetup<'_> {
        SweepSetup {
            grid: &self.grid,
            base: &self.base,
            perturbation: [&self.pert[0], &self.pert[1], &self.pert[2], &self.pert[3]],
            initial: [(&self.init[0].0, &self.init[0].1), (&self.init[1].0, &self.init[1].1)],
            stride: 1,
            settings: SolverSettings::default(),
        }
    }
}
