mod support;

use std::sync::OnceLock;

use lexrsm::checker::{check_certificate, Flavor};
use lexrsm::farkas::{farkas_encode, FarkasError, TemplateExpr};
use lexrsm::fixlab::{self, Kind, Shape};
use lexrsm::frontend::{self, Loaded};
use lexrsm::lp::{Budget, LpModel, Solution};
use lexrsm::pcfg::{pre_expectation, Distribution, MeasurableMap, UpdateElem};
use lexrsm::synthesis::{self, Options, Strategy as Method, Synthesized};
use lexrsm::{q, LinConstraint, LinExpr, Polyhedron, Rational};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, Uniform};

use support::corpus;

fn row(a: i64, b: i64, c: i64) -> LinConstraint {
    LinConstraint::le(LinExpr::from_parts(
        [(0, Rational::from(a)), (1, Rational::from(b))],
        Rational::from(c),
    ))
}

/// Vertices of a bounded polygon in the plane by brute-force line
/// intersection.
fn vertices(p: &Polyhedron) -> Vec<[Rational; 2]> {
    let rows = &p.constraints;
    let mut out = Vec::new();
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let (a, b) = (&rows[i].expr, &rows[j].expr);
            let det = &(&a.coeff(0) * &b.coeff(1)) - &(&a.coeff(1) * &b.coeff(0));
            if det.is_zero() {
                continue;
            }
            let (ca, cb) = (-a.constant_term().clone(), -b.constant_term().clone());
            let x = &(&(&ca * &b.coeff(1)) - &(&cb * &a.coeff(1))) / &det;
            let y = &(&(&a.coeff(0) * &cb) - &(&b.coeff(0) * &ca)) / &det;
            let pt = vec![x.clone(), y.clone()];
            if p.contains(&pt) {
                out.push([x, y]);
            }
        }
    }
    out
}

fn polygon() -> impl Strategy<Value = (Vec<(i64, i64, i64)>, (i64, i64, i64))> {
    let r = (-3i64..=3, -3i64..=3, -6i64..=6);
    (
        proptest::collection::vec(r, 0..4),
        (-3i64..=3, -3i64..=3, -12i64..=12),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// The encoding is feasible exactly when the consequent is non-positive on
    /// every vertex of the polygon, and any solution certifies it.
    #[test]
    fn farkas_matches_vertex_oracle((extra, (ca, cb, cc)) in polygon()) {
        let mut p = Polyhedron::new(vec![row(1, 0, -5), row(-1, 0, -5), row(0, 1, -5), row(0, -1, -5)]);
        for (a, b, c) in extra {
            p.push(row(a, b, c));
        }
        let cons = LinExpr::from_parts([(0, Rational::from(ca)), (1, Rational::from(cb))], Rational::from(cc));
        let vs = vertices(&p);
        let mut m = LpModel::new();
        match farkas_encode(&mut m, &p, &TemplateExpr::from_numeric(&cons), "t", 0, &Budget::unlimited()) {
            Err(FarkasError::UnsatisfiableAntecedent) => prop_assert!(vs.is_empty()),
            Err(e) => panic!("{e}"),
            Ok(enc) => {
                prop_assert!(!vs.is_empty());
                let holds = vs.iter().all(|v| !cons.eval(v).is_positive());
                match m.solve(&Budget::unlimited()).unwrap() {
                    Solution::Infeasible => prop_assert!(!holds),
                    Solution::Optimal { values, .. } => {
                        prop_assert!(holds);
                        prop_assert!(enc.certifies(&values));
                    }
                    Solution::Unbounded { point, .. } => {
                        prop_assert!(holds);
                        prop_assert!(enc.certifies(&point));
                    }
                }
            }
        }
    }
}

fn shape() -> impl Strategy<Value = Shape> {
    (1usize..=4, 2usize..=6, 1usize..=3).prop_map(|(dim, horizon, max_children)| Shape {
        dim,
        horizon,
        max_children,
    })
}

fn eps() -> impl Strategy<Value = Rational> {
    prop_oneof![
        Just(q(1, 10)),
        Just(q(1, 1)),
        Just(q(10, 1)),
        (1i64..=20, 1i64..=10).prop_map(|(n, d)| q(n, d))
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn glex_instances_are_eps_fixable(seed in any::<u64>(), shape in shape(), eps in eps()) {
        let g = fixlab::random_instance(Kind::Glex, seed, shape);
        prop_assert!(g.instance.validate().is_ok());
        prop_assert!(fixlab::check_flavor(&g.instance, &fixlab::Flavor::Glex).ok, "{:?}", g.repairs);
        prop_assert!(fixlab::is_eps_fixable(&g.instance, &eps));
    }

    #[test]
    fn gamma_relaxation_is_monotone(
        seed in any::<u64>(),
        shape in shape(),
        eps in eps(),
        g in (1i64..=10, 1i64..=10),
    ) {
        let inst = fixlab::random_instance(Kind::Lw, seed, shape).instance;
        let (lo, hi) = (q(g.0.min(g.1), 10), q(g.0.max(g.1), 10));
        if fixlab::is_eps_fixable(&inst, &eps) {
            prop_assert!(fixlab::is_eps_gamma_fixable(&inst, &eps, &hi));
        }
        if fixlab::is_eps_gamma_fixable(&inst, &eps, &hi) {
            prop_assert!(fixlab::is_eps_gamma_fixable(&inst, &eps, &lo));
        }
    }
}

#[test]
fn fig4_gamma_threshold_is_monotone() {
    let inst = fixlab::fig4_instance(8);
    let verdicts: Vec<bool> = (1..=10)
        .map(|k| fixlab::is_eps_gamma_fixable(&inst, &Rational::one(), &q(k, 10)))
        .collect();
    assert!(verdicts.windows(2).all(|w| w[0] || !w[1]), "{verdicts:?}");
}

const MC_SAMPLES: usize = 20_000;

fn draw(d: &Distribution, rng: &mut ChaCha8Rng) -> f64 {
    match d {
        Distribution::Dirac(v) => v.to_f64(),
        Distribution::Uniform(lo, hi) => Uniform::new_inclusive(lo.to_f64(), hi.to_f64())
            .unwrap()
            .sample(rng),
        Distribution::Normal(m, s) => Normal::new(m.to_f64(), s.to_f64()).unwrap().sample(rng),
    }
}

fn mc_program() -> &'static Loaded {
    static P: OnceLock<Loaded> = OnceLock::new();
    P.get_or_init(|| {
        frontend::load_str(
            "while x >= 0 do
               if prob(0.3) then x := x + sample(unif(-2, 1))
               else if prob(0.25) then y := 2 * y + sample(norm(1, 3)) else x := x - y fi fi
             od",
            None,
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    /// Exact pre-expectation against a Monte-Carlo average over one step.
    #[test]
    fn pre_expectation_matches_sampling(
        coeffs in proptest::collection::vec((-3i64..=3, -3i64..=3, -5i64..=5), 16),
        state in (-4i64..=4, -4i64..=4),
        seed in any::<u64>(),
    ) {
        let ld = mc_program();
        let pcfg = &ld.pcfg;
        let nv = pcfg.num_vars();
        let eta: Vec<LinExpr> = (0..pcfg.locations.len())
            .map(|l| {
                let (a, b, c) = coeffs[l % coeffs.len()];
                LinExpr::from_parts((0..nv).map(|v| (v, Rational::from(if v % 2 == 0 { a } else { b }))), Rational::from(c))
            })
            .collect();
        let x: Vec<f64> = (0..nv).map(|v| if v % 2 == 0 { state.0 as f64 } else { state.1 as f64 }).collect();
        let xq: Vec<Rational> = x.iter().map(|&v| Rational::from(v as i64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &pcfg.transitions {
            let exact = pre_expectation(pcfg, |l| Some(eta[l].clone()), t).unwrap();
            prop_assert_eq!(exact.len(), 1);
            let exact = exact[0].eval(&xq).to_f64();
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..MC_SAMPLES {
                let mut u: f64 = rng.random();
                let b = t.branches.iter().find(|b| {
                    u -= b.prob.to_f64();
                    u < 0.0
                }).unwrap_or(t.branches.last().unwrap());
                let mut y = x.clone();
                if let Some(up) = &t.update {
                    y[up.var] = match &up.elem {
                        UpdateElem::Det(f) => f.eval_f64(&x),
                        UpdateElem::Sample { base, dist } => base.eval_f64(&x) + draw(dist, &mut rng),
                        UpdateElem::Ndet { .. } => unreachable!("no nondeterminism in this program"),
                    };
                }
                let v = eta[b.target].eval_f64(&y);
                sum += v;
                sq += v * v;
            }
            let n = MC_SAMPLES as f64;
            let mean = sum / n;
            let se = ((sq / n - mean * mean).max(0.0) / n).sqrt();
            prop_assert!((mean - exact).abs() <= 5.0 * se + 1e-9, "{}: exact {exact}, sampled {mean} ± {se}", t.name());
        }
    }
}

/// SMC certificates for a few programs, synthesized once.
fn certificates() -> &'static [(Loaded, Synthesized, Rational)] {
    static C: OnceLock<Vec<(Loaded, Synthesized, Rational)>> = OnceLock::new();
    C.get_or_init(|| {
        [
            ("golden/fig2.pp", Some("golden/fig2.inv")),
            ("table1/speedDis1.pp", None),
            ("table1/cousot9.pp", None),
        ]
        .iter()
        .map(|(p, i)| {
            let ld = frontend::load(&corpus(p), i.map(corpus).as_deref()).unwrap();
            let opts = Options::new(Method::Smc);
            let s = synthesis::synthesize(&ld.pcfg, &ld.inv, &opts).unwrap();
            (ld, s, opts.c)
        })
        .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    /// Perturbing a synthesized certificate never breaks the implications
    /// ST ⇒ LW ⇒ SC between non-negativity flavors.
    #[test]
    fn flavor_lattice(which in 0usize..3, bumps in proptest::collection::vec((0usize..64, 0usize..4, -20i64..=20), 0..4)) {
        let (ld, s, c) = &certificates()[which];
        let mut eta: MeasurableMap = s.eta.clone();
        for (l, k, d) in bumps {
            let l = l % eta.exprs.len();
            let k = k % eta.dim;
            eta.exprs[l][k].add_constant(&Rational::from(d));
        }
        let ok = |f| check_certificate(&ld.pcfg, &ld.inv, &eta, &s.lv, c, f).unwrap().is_ok();
        let (st, lw, sc) = (ok(Flavor::St), ok(Flavor::Lw), ok(Flavor::Sc));
        prop_assert!(!st || lw, "ST without LW");
        prop_assert!(!lw || sc, "LW without SC");
    }
}
