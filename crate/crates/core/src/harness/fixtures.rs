//! Problem fixtures with their true parameters and data-generating laws.

use serde::{Deserialize, Serialize};

use super::{DataLaw, NoiseModel, WeightLaw};
use crate::builders::{build_mlp, build_mqp, build_traffic, Link, MaskEntry, Network, OdPair};
use crate::error::Result;
use crate::model::{Constraints, DmpInstance, Family, Normalization, Objective, ParamSpace, ParamVector, Slot, SlotTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureId {
    MlpTriobj,
    MqpRhs,
    MqpObj,
    Portfolio,
    Traffic,
    IntroBiobj,
    Example1,
    Example2,
}

impl FixtureId {
    pub const ALL: [FixtureId; 8] = [
        FixtureId::MlpTriobj,
        FixtureId::MqpRhs,
        FixtureId::MqpObj,
        FixtureId::Portfolio,
        FixtureId::Traffic,
        FixtureId::IntroBiobj,
        FixtureId::Example1,
        FixtureId::Example2,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FixtureId::MlpTriobj => "mlp-triobj",
            FixtureId::MqpRhs => "mqp-rhs",
            FixtureId::MqpObj => "mqp-obj",
            FixtureId::Portfolio => "portfolio",
            FixtureId::Traffic => "traffic",
            FixtureId::IntroBiobj => "intro-biobj",
            FixtureId::Example1 => "example1",
            FixtureId::Example2 => "example2",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub id: FixtureId,
    pub instance: DmpInstance,
    pub theta_true: ParamVector,
    pub law: DataLaw,
    pub noise: NoiseModel,
    /// Report estimation error relative to |θ_true|.
    pub relative_error: bool,
}

pub fn fixture(id: FixtureId) -> Result<Fixture> {
    let simplex = DataLaw::WeightedSum { weights: WeightLaw::UniformSimplex };
    let (instance, theta_true, law, noise, relative_error) = match id {
        FixtureId::MlpTriobj => (mlp_instance()?, mlp_true_theta(), mlp_faces(), NoiseModel::Gaussian { sigma: 0.5 }, false),
        FixtureId::MqpRhs => (
            mqp_rhs_instance()?,
            vec![-3.0, -6.0],
            simplex,
            NoiseModel::TruncatedGaussian { sigma: 0.1, lo: -1.0, hi: 1.0 },
            false,
        ),
        FixtureId::MqpObj => (mqp_obj_instance()?, vec![3.0, 1.0, -6.0, -5.0], simplex, NoiseModel::Uniform { a: 0.25 }, false),
        FixtureId::Portfolio => (
            portfolio_instance(&[0, 1, 2, 3, 4], 0.0, 0.4)?,
            PORTFOLIO_RETURNS[..5].to_vec(),
            DataLaw::WeightedSum { weights: WeightLaw::TruncatedNormalFirst { mean: 0.5, sd: 0.1, lo: 0.0, hi: 1.0 } },
            NoiseModel::Rounding { granularity: 0.001 },
            false,
        ),
        FixtureId::Traffic => (
            build_traffic("traffic", &six_node_network(), &[(0, 1000.0, 10000.0), (1, 1000.0, 10000.0)])?,
            vec![2500.0, 3500.0],
            DataLaw::WeightedSum { weights: WeightLaw::UniformFirst { lo: 0.3, hi: 0.7 } },
            NoiseModel::Rounding { granularity: 10.0 },
            true,
        ),
        FixtureId::IntroBiobj => {
            let (a, b, c) = (6.0, 1.0, 1.0);
            let [ac, bd] = intro_segments(a, b, c);
            (intro_instance(a, b, c)?, vec![1.0, 0.0, 0.0, 1.0], DataLaw::Segments { segments: vec![ac, bd] }, NoiseModel::None, false)
        }
        FixtureId::Example1 => (example_instance()?, EXAMPLE1_THETA.to_vec(), simplex, NoiseModel::None, false),
        FixtureId::Example2 => (example_instance()?, EXAMPLE2_THETA.to_vec(), simplex, NoiseModel::None, false),
    };
    Ok(Fixture { id, instance, theta_true, law, noise, relative_error })
}

fn linear_mask(p: usize, n: usize, lo: f64, hi: f64) -> Vec<MaskEntry> {
    (0..p)
        .flat_map(|l| (0..n).map(move |j| (l, j)))
        .map(|(l, j)| MaskEntry::new(format!("c{}_{}", l + 1, j + 1), SlotTarget::Linear { objective: l, index: j }, lo, hi))
        .collect()
}

/// min {-x1, -x2, -x3} s.t. x1 + x2 + x3 ≤ 5, x1 + x2 + 3x3 ≤ 9, x ≥ 0, with
/// all nine coefficients free in [-1, 0] and 1ᵀc_l = -1.
pub fn mlp_instance() -> Result<DmpInstance> {
    let c = vec![vec![-1.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, -1.0]];
    let a = vec![vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 3.0]];
    build_mlp("mlp-triobj", c, a, vec![5.0, 9.0], &linear_mask(3, 3, -1.0, 0.0), true)
}

fn mlp_true_theta() -> ParamVector {
    vec![-1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0]
}

/// The two efficient faces of the true MLP: the quadrilateral on
/// x1 + x2 + x3 = 5 and the triangle on x1 + x2 + 3x3 = 9.
pub fn mlp_faces() -> DataLaw {
    DataLaw::Faces {
        faces: vec![
            vec![vec![5.0, 0.0, 0.0], vec![3.0, 0.0, 2.0], vec![0.0, 3.0, 2.0], vec![0.0, 5.0, 0.0]],
            vec![vec![0.0, 0.0, 3.0], vec![3.0, 0.0, 2.0], vec![0.0, 3.0, 2.0]],
        ],
    }
}

/// A published estimate for the MLP fixture, each objective rescaled so its
/// coefficients sum to exactly -1.
pub fn mlp_reported_estimate() -> ParamVector {
    let raw = [
        [-0.3333, -0.3333, -0.3333],
        [-0.3450, -0.3450, -0.3099],
        [-0.1227, -0.1227, -0.7546],
    ];
    raw.iter()
        .flat_map(|c| {
            let s: f64 = c.iter().sum();
            c.iter().map(move |v| -v / s)
        })
        .collect()
}

fn mqp_objectives() -> (Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>) {
    (
        vec![vec![vec![1.0, 0.0], vec![0.0, 2.0]], vec![vec![2.0, 0.0], vec![0.0, 1.0]]],
        vec![vec![3.0, 1.0], vec![-6.0, -5.0]],
    )
}

/// x2 ≤ 3, 3x1 - x2 ≤ 6, x ≥ 0.
fn mqp_constraints() -> Constraints {
    let mut cons = Constraints::nonneg(2);
    cons.a_ineq = vec![vec![0.0, 1.0], vec![3.0, -1.0]];
    cons.b_ineq = vec![3.0, 6.0];
    cons
}

/// Right-hand sides θ of A x ≥ θ with A = [[0, -1], [-3, 1]], free in
/// [-8, -1]².
pub fn mqp_rhs_instance() -> Result<DmpInstance> {
    let (q, c) = mqp_objectives();
    let mask = vec![
        MaskEntry::new("b1", SlotTarget::IneqRhs { row: 0 }, -8.0, -1.0).scaled(-1.0),
        MaskEntry::new("b2", SlotTarget::IneqRhs { row: 1 }, -8.0, -1.0).scaled(-1.0),
    ];
    build_mqp("mqp-rhs", q, c, mqp_constraints(), &mask, Vec::new())
}

/// Both linear terms free in [-10, 10]².
pub fn mqp_obj_instance() -> Result<DmpInstance> {
    let (q, c) = mqp_objectives();
    build_mqp("mqp-obj", q, c, mqp_constraints(), &linear_mask(2, 2, -10.0, 10.0), Vec::new())
}

pub const PORTFOLIO_RETURNS: [f64; 8] = [0.1791, 0.1143, 0.1357, 0.0837, 0.1653, 0.1808, 0.0352, 0.0368];

pub const PORTFOLIO_COVARIANCE: [[f64; 8]; 8] = [
    [0.1641, 0.0299, 0.0478, 0.0491, 0.0580, 0.0871, 0.0603, 0.0492],
    [0.0299, 0.0720, 0.0511, 0.0287, 0.0527, 0.0297, 0.0291, 0.0326],
    [0.0478, 0.0511, 0.0794, 0.0498, 0.0664, 0.0479, 0.0395, 0.0523],
    [0.0491, 0.0287, 0.0498, 0.1148, 0.0336, 0.0503, 0.0326, 0.0447],
    [0.0580, 0.0527, 0.0664, 0.0336, 0.1073, 0.0483, 0.0402, 0.0533],
    [0.0871, 0.0297, 0.0479, 0.0503, 0.0483, 0.1134, 0.0591, 0.0387],
    [0.0603, 0.0291, 0.0395, 0.0326, 0.0402, 0.0591, 0.0704, 0.0244],
    [0.0492, 0.0326, 0.0523, 0.0447, 0.0533, 0.0387, 0.0244, 0.1028],
];

/// Mean-variance selection min {-rᵀx, xᵀΣx} over 0 ≤ x ≤ 1, 1ᵀx = 1, with
/// the returns at `free` as parameters in [lo, hi].
pub fn portfolio_instance(free: &[usize], lo: f64, hi: f64) -> Result<DmpInstance> {
    let n = PORTFOLIO_RETURNS.len();
    let q2: Vec<Vec<f64>> = PORTFOLIO_COVARIANCE.iter().map(|r| r.iter().map(|v| 2.0 * v).collect()).collect();
    let q = vec![vec![vec![0.0; n]; n], q2];
    let c = vec![PORTFOLIO_RETURNS.iter().map(|r| -r).collect(), vec![0.0; n]];
    let mut cons = Constraints::nonneg(n);
    cons.upper = vec![Some(1.0); n];
    cons.a_eq = vec![vec![1.0; n]];
    cons.b_eq = vec![1.0];
    let mask: Vec<MaskEntry> = free
        .iter()
        .map(|&j| MaskEntry::new(format!("r{}", j + 1), SlotTarget::Linear { objective: 0, index: j }, lo, hi).scaled(-1.0))
        .collect();
    build_mqp("portfolio", q, c, cons, &mask, Vec::new())
}

/// Six nodes, seven links, O-D pairs (1,3) and (2,4).
pub fn six_node_network() -> Network {
    let spec = [
        (1, 3, 8.0, 2000.0),
        (2, 4, 9.0, 2000.0),
        (1, 5, 2.0, 2000.0),
        (5, 6, 6.0, 4000.0),
        (2, 5, 3.0, 2000.0),
        (6, 3, 3.0, 2500.0),
        (6, 4, 4.0, 2500.0),
    ];
    Network {
        links: spec
            .iter()
            .map(|&(from, to, t0, capacity)| Link { from, to, t0, capacity, emission: t0 })
            .collect(),
        od_pairs: vec![
            OdPair { origin: 1, destination: 3, demand: 2500.0 },
            OdPair { origin: 2, destination: 4, demand: 3500.0 },
        ],
    }
}

/// min {x1, x2} over a x1 + b x2 ≥ 0, b x1 + a x2 ≥ 0, x1 + x2 ≤ c, with both
/// objective vectors free in [-1, 1]² and normalised to 1ᵀc_l = 1.
pub fn intro_instance(a: f64, b: f64, c: f64) -> Result<DmpInstance> {
    let mut cons = Constraints::free(2);
    cons.a_ineq = vec![vec![-a, -b], vec![-b, -a], vec![1.0, 1.0]];
    cons.b_ineq = vec![0.0, 0.0, c];
    let objectives = vec![Objective::linear(vec![1.0, 0.0]), Objective::linear(vec![0.0, 1.0])];
    let slots: Vec<Slot> = (0..2)
        .flat_map(|l| (0..2).map(move |j| (l, j)))
        .map(|(l, j)| Slot { name: format!("c{}_{}", l + 1, j + 1), target: SlotTarget::Linear { objective: l, index: j }, scale: 1.0 })
        .collect();
    let space = ParamSpace {
        lower: vec![-1.0; 4],
        upper: vec![1.0; 4],
        normalizations: vec![
            Normalization { coefficients: vec![1.0, 1.0, 0.0, 0.0], rhs: 1.0 },
            Normalization { coefficients: vec![0.0, 0.0, 1.0, 1.0], rhs: 1.0 },
        ],
    };
    DmpInstance::new("intro-biobj", Family::Linear, objectives, cons, slots, space)
}

/// Segments AC and BD: the outer halves of the efficient edges OA and OB.
pub fn intro_segments(a: f64, b: f64, c: f64) -> [[Vec<f64>; 2]; 2] {
    let v = b * c / (a - b);
    let pt_a = vec![-v, a / b * v];
    let pt_b = vec![a / b * v, -v];
    let pt_c = vec![-v / 2.0, a / b * v / 2.0];
    let pt_d = vec![a / b * v / 2.0, -v / 2.0];
    [[pt_a, pt_c], [pt_b, pt_d]]
}

/// `samples` points evenly spread over AC and BD (midpoint rule, half on
/// each segment).
pub fn intro_points(a: f64, b: f64, c: f64, samples: usize) -> Vec<Vec<f64>> {
    let half = samples / 2;
    let segs = intro_segments(a, b, c);
    let mut out = Vec::with_capacity(2 * half);
    for [p, q] in &segs {
        for i in 0..half {
            let t = (i as f64 + 0.5) / half as f64;
            out.push(p.iter().zip(q).map(|(x, y)| x + t * (y - x)).collect());
        }
    }
    out
}

/// Two strongly convex quadratics over x2 ≤ 3, 3x1 - x2 ≤ 6, x ≥ 0. θ holds
/// the coefficients of f_l = θ1 x1² + θ2 x2² + θ3 x1 + θ4 x2 for l = 1, 2.
pub fn example_instance() -> Result<DmpInstance> {
    let (q, c) = (vec![vec![vec![2.0, 0.0], vec![0.0, 4.0]], vec![vec![4.0, 0.0], vec![0.0, 2.0]]], vec![
        vec![6.0, 2.0],
        vec![-12.0, -10.0],
    ]);
    let mut mask = Vec::new();
    for l in 0..2 {
        for j in 0..2 {
            mask.push(MaskEntry::new(format!("q{}_{}", l + 1, j + 1), SlotTarget::QuadDiag { objective: l, index: j }, 0.5, 15.0).scaled(2.0));
        }
        for j in 0..2 {
            mask.push(MaskEntry::new(format!("c{}_{}", l + 1, j + 1), SlotTarget::Linear { objective: l, index: j }, -80.0, 25.0));
        }
    }
    build_mqp("example", q, c, mqp_constraints(), &mask, Vec::new())
}

pub const EXAMPLE1_THETA: [f64; 8] = [1.0, 2.0, 6.0, 2.0, 2.0, 1.0, -12.0, -10.0];
pub const EXAMPLE2_THETA: [f64; 8] = [7.0, 11.0, 18.0, 0.0, 12.0, 6.0, -72.0, -60.0];
