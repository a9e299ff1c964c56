use electroseis::em::InitialField;
use electroseis::field::{node_vec_zeros, Field3, NodeVec, VecField};
use electroseis::grid::{build_domain, Domain, Grid, Resolution};
use electroseis::inverse::{collect_measurement, InitialDerivatives, Measurement, MIN_LEVELS};
use electroseis::params::{Bump, ParameterFields, ScalarSpec, UniformParams};
use electroseis::pipeline::{shared_grid, SolverSettings};

pub fn grid(n: usize) -> Grid {
    build_domain(
        Domain::unit_cube(0.25, 1.0, 0.2),
        Resolution {
            n: [n; 3],
            dt_max: None,
        },
    )
    .unwrap()
    .1
}

pub fn base(g: &Grid) -> ParameterFields {
    let v = UniformParams {
        electrokinetic: 0.5,
        sigma: 0.2,
        ..Default::default()
    };
    ParameterFields::uniform(g.node_dims(), &v).unwrap()
}

pub fn bump(g: &Grid, amp: f64, center: [f64; 3]) -> Field3 {
    ScalarSpec::constant(0.0)
        .with_bump(Bump::Compact {
            amp,
            center,
            radius: 0.2,
        })
        .sample(g)
}

/// `B₀⁽¹⁾ = e₁, D₀⁽¹⁾ = e₂, B₀⁽²⁾ = D₀⁽²⁾ = e₃`.
pub fn canonical_data(g: &Grid) -> [(VecField, VecField); 2] {
    let c = |v: [f64; 3]| InitialField::Constant(v);
    [
        (c([0.0, 1.0, 0.0]).edge_field(g), c([1.0, 0.0, 0.0]).face_field(g)),
        (c([0.0, 0.0, 1.0]).edge_field(g), c([0.0, 0.0, 1.0]).face_field(g)),
    ]
}

pub struct Twin {
    pub grid: Grid,
    pub p1: ParameterFields,
    pub truth: [Field3; 4],
    pub measurement: Measurement,
}

pub fn twin(n: usize, scale: f64, data: impl Fn(&Grid) -> [(VecField, VecField); 2]) -> Twin {
    let g = grid(n);
    let p1 = base(&g);
    let truth = [
        bump(&g, 0.2 * scale, [0.5, 0.5, 0.5]),
        bump(&g, 0.15 * scale, [0.45, 0.55, 0.5]),
        bump(&g, 0.3 * scale, [0.55, 0.45, 0.5]),
        bump(&g, 0.25 * scale, [0.5, 0.5, 0.45]),
    ];
    let p2 = p1.with_em_increments(&truth[0], &truth[1], &truth[2], &truth[3]).unwrap();
    let set = SolverSettings::default();
    let g = shared_grid(&g, 1.0, &[&p1, &p2], &set).unwrap();
    let measurement = collect_measurement(&g, &p1, &p2, data(&g), MIN_LEVELS, &set).unwrap();
    Twin {
        grid: g,
        p1,
        truth,
        measurement,
    }
}

pub fn constant(g: &Grid, v: [f64; 3]) -> NodeVec {
    std::array::from_fn(|c| Field3::filled(g.node_dims(), v[c]))
}

pub fn derivs_from(g: &Grid, d0: [f64; 3], b0: [f64; 3], a: [f64; 3]) -> InitialDerivatives {
    let z = node_vec_zeros(g.n);
    InitialDerivatives {
        d0: constant(g, d0),
        b0: constant(g, b0),
        dd: z.clone(),
        db: z.clone(),
        a: constant(g, a),
        grad_a: [z.clone(), z.clone(), z],
    }
}
