use electroseis::carleman::{build_weight, Bump, BumpVectorField, CarlemanWeight, SpaceTimeBump};
use electroseis::field::Field3;
use electroseis::grid::{build_domain, Domain, Grid, Resolution as GridResolution};

pub const X_STAR: [f64; 3] = [-2.0, 0.5, 0.5];

pub fn speed(x: [f64; 3]) -> f64 {
    1.0 + 0.1 * x[0]
}

pub fn setup(theta: f64) -> (Grid, CarlemanWeight) {
    let (d, g) = build_domain(
        Domain::unit_cube(0.25, 1.0, 0.2),
        GridResolution {
            n: [16; 3],
            dt_max: None,
        },
    )
    .unwrap();
    let c = Field3::from_fn(g.node_dims(), |i, j, k| speed(g.node(i, j, k)));
    let w = build_weight(&d, &g, &[c], X_STAR, 0.5, 12.0, theta).unwrap();
    (g, w)
}

pub fn bump() -> Bump {
    Bump {
        center: [0.5; 3],
        radius: 0.3,
        power: 6,
    }
}

pub fn wave_field() -> SpaceTimeBump {
    SpaceTimeBump {
        amp: 1.0,
        space: bump(),
        t_center: 0.0,
        t_radius: 0.5,
    }
}

pub fn vector_field() -> BumpVectorField {
    BumpVectorField {
        bump: bump(),
        gradient: 1.0,
        swirl: 0.7,
    }
}

pub fn oscillating(x: [f64; 3], t: f64) -> ([f64; 3], [f64; 3]) {
    let (b, _, _) = bump().derivs(x);
    let k = 3.0;
    ([b * (k * t).cos(), 0.0, 0.0], [-k * b * (k * t).sin(), 0.0, 0.0])
}
