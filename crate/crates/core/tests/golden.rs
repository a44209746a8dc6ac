use deconfound_core::effects::{
    arr, collapsed_2x2, heterogeneity_ratio, intervention_or, mantel_haenszel_or, odds,
    profile_ratio, strata_2x2, stratified_or,
};
use deconfound_core::stats::{chi_square_independence, fisher_exact_2x2};
use deconfound_core::{
    fixtures, logit_projection, parity_only_projection, pr_projection, Assignment, Estimate, Event,
    JointTable, Undefined,
};

const CELL_TOL: f64 = 2e-6;

fn at(t: &JointTable, pairs: &[(&str, &str)]) -> Assignment {
    t.schema().assign(pairs).unwrap()
}

fn weight(t: &JointTable, labels: &[&str]) -> f64 {
    t.weights()[t.schema().cell_of(labels).unwrap()]
}

fn or_of(t: &JointTable, event: &str, group: &Assignment, reference: &Assignment) -> f64 {
    let e = Event::parse(t.schema(), event).unwrap();
    odds(t, e, group)
        .ratio(odds(t, e, reference))
        .value()
        .unwrap()
}

fn close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} +- {tol}"
    );
}

mod tuberculosis {
    use super::*;

    // (outcome, place, ethnicity, pr, logit)
    const TABLE: [(&str, &str, &str, f64, f64); 8] = [
        (
            "survived",
            "New York",
            "African American",
            0.027413,
            0.018638,
        ),
        ("survived", "New York", "White", 0.944682, 0.953473),
        (
            "survived",
            "Richmond",
            "African American",
            0.000735,
            0.009511,
        ),
        ("survived", "Richmond", "White", 0.025297, 0.016506),
        ("died", "New York", "African American", 0.000134, 0.000100),
        ("died", "New York", "White", 0.001695, 0.001714),
        ("died", "Richmond", "African American", 0.000002, 0.000037),
        ("died", "Richmond", "White", 0.000041, 0.000022),
    ];

    #[test]
    fn pr_and_logit_columns() {
        let f = fixtures::tuberculosis1910().unwrap();
        let pr = pr_projection(&f.normalize().unwrap()).unwrap();
        let logit = logit_projection(&f.normalize().unwrap()).unwrap();
        assert!(pr.converged && logit.converged);
        for (y, x, s, want_pr, want_logit) in TABLE {
            let labels = [y, x, s];
            close(
                weight(&pr.q, &labels),
                want_pr,
                CELL_TOL,
                &format!("pr {labels:?}"),
            );
            close(
                weight(&logit.q, &labels),
                want_logit,
                CELL_TOL,
                &format!("logit {labels:?}"),
            );
        }
    }

    #[test]
    fn simpson_chain() {
        let f = fixtures::tuberculosis1910().unwrap();
        let ny = at(&f, &[("place", "New York")]);
        let rich = at(&f, &[("place", "Richmond")]);
        let aa = at(&f, &[("ethnicity", "African American")]);
        let white = at(&f, &[("ethnicity", "White")]);

        close(or_of(&f, "died", &rich, &ny), 1.2, 0.05, "empirical OR");
        let q = pr_projection(&f.normalize().unwrap()).unwrap().q;
        close(or_of(&q, "died", &rich, &ny), 0.882, 0.001, "PR OR");
        let p = parity_only_projection(&f.normalize().unwrap()).unwrap().q;
        close(
            or_of(&p, "died", &rich, &ny),
            0.879,
            0.001,
            "parity-only OR",
        );

        let died = Event::parse(f.schema(), "died").unwrap();
        for (s, want) in [(&aa, 0.59), (&white, 0.90)] {
            let sf = stratified_or(&f, died, &rich, &ny, s).value().unwrap();
            let sq = stratified_or(&q, died, &rich, &ny, s).value().unwrap();
            close(sf, want, 0.01, "stratified OR");
            assert!(
                ((sq - sf) / sf).abs() <= 1e-8,
                "stratified OR moved: {sf} -> {sq}"
            );
        }

        close(or_of(&f, "died", &aa, &white), 2.71, 0.01, "ethnicity OR");

        let l = logit_projection(&f.normalize().unwrap()).unwrap().q;
        for s in [&aa, &white] {
            let v = stratified_or(&l, died, &rich, &ny, s).value().unwrap();
            close(v, 0.726, 0.001, "logit stratified OR");
        }
        close(
            or_of(&l, "died", &rich, &ny),
            1.20,
            0.005,
            "logit marginal OR",
        );

        let strata = strata_2x2(&f, died, &rich, &ny).unwrap();
        close(mantel_haenszel_or(&strata).unwrap(), 0.73, 0.01, "MH");
    }

    #[test]
    fn fisher_on_collapsed_table() {
        let f = fixtures::tuberculosis1910().unwrap();
        let died = Event::parse(f.schema(), "died").unwrap();
        let t = collapsed_2x2(
            &f,
            died,
            &at(&f, &[("place", "Richmond")]),
            &at(&f, &[("place", "New York")]),
        );
        let p = fisher_exact_2x2(&t).unwrap();
        assert!((p / 0.0025 - 1.0).abs() <= 0.15, "p = {p}");
    }
}

mod streptomycin {
    use super::*;

    // (gender, baseline, improvement, control, streptomycin)
    const PR: [(&str, &str, &str, f64, f64); 12] = [
        ("female", "good", "not improved", 0.0, 0.0),
        ("female", "good", "improved", 0.036335, 0.038431),
        ("female", "fair", "not improved", 0.045886, 0.019534),
        ("female", "fair", "improved", 0.044951, 0.076544),
        ("female", "poor", "not improved", 0.140798, 0.083501),
        ("female", "poor", "improved", 0.0, 0.065421),
        ("male", "good", "not improved", 0.0, 0.0),
        ("male", "good", "improved", 0.036335, 0.038431),
        ("male", "fair", "not improved", 0.050943, 0.014478),
        ("male", "fair", "improved", 0.026269, 0.067189),
        ("male", "poor", "not improved", 0.104463, 0.026378),
        ("male", "poor", "improved", 0.0, 0.084112),
    ];

    const GENDERS: [&str; 2] = ["female", "male"];
    const BASELINES: [&str; 3] = ["good", "fair", "poor"];

    fn profile(t: &JointTable, g: &str, b: &str) -> Assignment {
        at(t, &[("gender", g), ("baseline", b)])
    }

    #[test]
    fn pr_probabilities() {
        let f = fixtures::streptomycin1948().unwrap();
        let q = pr_projection(&f.normalize().unwrap()).unwrap().q;
        for (g, b, y, ctrl, strep) in PR {
            close(
                weight(&q, &[g, b, y, "control"]),
                ctrl,
                CELL_TOL,
                &format!("{g} {b} {y} control"),
            );
            close(
                weight(&q, &[g, b, y, "streptomycin"]),
                strep,
                CELL_TOL,
                &format!("{g} {b} {y} strep"),
            );
        }
    }

    #[test]
    fn intervention_or_rises() {
        let f = fixtures::streptomycin1948().unwrap();
        let strep = at(&f, &[("treatment", "streptomycin")]);
        let ctrl = at(&f, &[("treatment", "control")]);
        close(
            or_of(&f, "improved", &strep, &ctrl),
            4.60,
            0.01,
            "empirical OR",
        );
        let q = pr_projection(&f.normalize().unwrap()).unwrap().q;
        close(or_of(&q, "improved", &strep, &ctrl), 6.12, 0.01, "PR OR");

        let improved = Event::parse(f.schema(), "improved").unwrap();
        let ors = intervention_or(&q, improved, &ctrl).unwrap();
        assert_eq!(ors.len(), 2);
        assert_eq!(
            ors.iter().find(|e| e.key == ctrl).unwrap().value,
            Estimate::Value(1.0)
        );
    }

    #[test]
    fn parity_counts_and_prevalences() {
        let f = fixtures::streptomycin1948().unwrap();
        let q = pr_projection(&f.normalize().unwrap()).unwrap().q;
        let n = f.total();
        let want = [[8.0, 20.0, 31.0], [8.0, 17.0, 23.0]];
        for x in ["control", "streptomycin"] {
            let group = at(&q, &[("treatment", x)]);
            let gm = q.mass(&group);
            for (gi, g) in GENDERS.iter().enumerate() {
                for (bi, b) in BASELINES.iter().enumerate() {
                    let c = n * q.mass(&group.merged(&profile(&q, g, b))) / gm;
                    close(c, want[gi][bi], 1e-6, &format!("{x} {g} {b}"));
                }
            }
        }
        assert_eq!(f.mass(&at(&f, &[("treatment", "control")])), 52.0);
        assert_eq!(f.mass(&at(&f, &[("treatment", "streptomycin")])), 55.0);
        close(
            n * q.mass(&at(&q, &[("treatment", "control")])),
            52.0,
            1e-8,
            "N q_X(control)",
        );
        close(
            n * q.mass(&at(&q, &[("treatment", "streptomycin")])),
            55.0,
            1e-8,
            "N q_X(strep)",
        );
    }

    #[test]
    fn three_factor_or_table() {
        let f = fixtures::streptomycin1948().unwrap();
        let q = pr_projection(&f.normalize().unwrap()).unwrap().q;
        let improved = Event::parse(f.schema(), "improved").unwrap();
        let ctrl = at(&f, &[("treatment", "control")]);
        let strep = at(&f, &[("treatment", "streptomycin")]);
        let want = [
            [None, Some(0.25), Some(0.0)],
            [None, Some(1.0 / 9.0), Some(0.0)],
        ];
        for p in [&f, &q] {
            for (gi, g) in GENDERS.iter().enumerate() {
                for (bi, b) in BASELINES.iter().enumerate() {
                    let v = stratified_or(p, improved, &ctrl, &strep, &profile(p, g, b));
                    match want[gi][bi] {
                        None => assert!(
                            matches!(v, Estimate::Undefined(Undefined::CertainEvent)),
                            "{g} {b}: {v:?}"
                        ),
                        Some(w) => close(v.value().unwrap(), w, 1e-9, &format!("{g} {b}")),
                    }
                }
            }
        }
    }

    #[test]
    fn arr_grids() {
        let f = fixtures::streptomycin1948().unwrap();
        let q = pr_projection(&f.normalize().unwrap()).unwrap().q;
        let bad = Event::parse(f.schema(), "not improved").unwrap();
        let ctrl = at(&f, &[("treatment", "control")]);
        let strep = at(&f, &[("treatment", "streptomycin")]);
        let grids = [
            (&f, [[0.0, 30.0, 41.0], [0.0, 46.0, 69.0]]),
            (&q, [[0.0, 30.0, 44.0], [0.0, 48.0, 76.0]]),
        ];
        for (p, want) in grids {
            for (gi, g) in GENDERS.iter().enumerate() {
                for (bi, b) in BASELINES.iter().enumerate() {
                    let v = arr(p, bad, &strep, &ctrl, Some(&profile(p, g, b))).unwrap();
                    close(100.0 * v, want[gi][bi], 1.0, &format!("ARR {g} {b}"));
                }
            }
        }
        assert!(arr(&f, bad, &strep, &ctrl, None).unwrap() > 0.36);
        assert!(arr(&q, bad, &strep, &ctrl, None).unwrap() > 0.42);
    }

    #[test]
    fn heterogeneity_display() {
        let f = fixtures::streptomycin1948().unwrap();
        let ctrl = at(&f, &[("treatment", "control")]);
        let strep = at(&f, &[("treatment", "streptomycin")]);
        let ratios = heterogeneity_ratio(&f, &strep, &ctrl).unwrap();
        let want = [[0.95, 0.95, 1.15], [0.95, 0.66, 1.23]];
        for (gi, g) in GENDERS.iter().enumerate() {
            for (bi, b) in BASELINES.iter().enumerate() {
                let key = profile(&f, g, b);
                let e = ratios.iter().find(|e| e.key == key).unwrap();
                close(
                    e.value.value().unwrap(),
                    want[gi][bi],
                    0.01,
                    &format!("{g} {b}"),
                );
            }
        }
        let q = pr_projection(&f.normalize().unwrap()).unwrap().q;
        for e in heterogeneity_ratio(&q, &strep, &ctrl).unwrap() {
            close(e.value.value().unwrap(), 1.0, 1e-7, "parity ratio");
        }
    }

    #[test]
    fn significance() {
        let f = fixtures::streptomycin1948().unwrap();
        let improved = Event::parse(f.schema(), "improved").unwrap();
        let t = collapsed_2x2(
            &f,
            improved,
            &at(&f, &[("treatment", "streptomycin")]),
            &at(&f, &[("treatment", "control")]),
        );
        let p = fisher_exact_2x2(&t).unwrap();
        assert!((p / 0.0002 - 1.0).abs() <= 0.15, "p = {p}");

        let bad = Event::parse(f.schema(), "not improved").unwrap();
        let fair = at(&f, &[("baseline", "fair")]);
        let poor = at(&f, &[("baseline", "poor")]);
        close(
            or_of(&f, "not improved", &fair, &poor),
            0.26,
            0.01,
            "fair vs poor",
        );
        let t = collapsed_2x2(&f, bad, &fair, &poor);
        let p = fisher_exact_2x2(&t).unwrap();
        assert!((p / 0.003 - 1.0).abs() <= 0.3, "p = {p}");
        let good = at(&f, &[("baseline", "good")]);
        assert_eq!(or_of(&f, "not improved", &good, &poor), 0.0);
    }
}

mod kidney {
    use super::*;

    const TREATMENTS: [&str; 4] = [
        "ESWL",
        "nephrolithotomy/pyelolithotomy",
        "percutaneous nephrolithotomy",
        "pyelolithotomy",
    ];
    const REFERENCE: &str = "percutaneous nephrolithotomy";

    // per treatment: large no, large yes, small no, small yes
    const PR: [[f64; 4]; 4] = [
        [0.029433, 0.128444, 0.003634, 0.171484],
        [0.032787, 0.078401, 0.010006, 0.113324],
        [0.052872, 0.115594, 0.026192, 0.160672],
        [0.005721, 0.030861, 0.006868, 0.033708],
    ];

    fn group(t: &JointTable, x: &str) -> Assignment {
        at(t, &[("treatment", x)])
    }

    #[test]
    fn pr_column() {
        let f = fixtures::kidney1986().unwrap();
        let q = pr_projection(&f.normalize().unwrap()).unwrap().q;
        for (x, row) in TREATMENTS.iter().zip(PR) {
            let cells = [
                ("large", "unsuccessful"),
                ("large", "successful"),
                ("small", "unsuccessful"),
                ("small", "successful"),
            ];
            for ((s, y), want) in cells.iter().zip(row) {
                close(
                    weight(&q, &[x, s, y]),
                    want,
                    CELL_TOL,
                    &format!("{x} {s} {y}"),
                );
            }
        }
    }

    #[test]
    fn intervention_ors() {
        let f = fixtures::kidney1986().unwrap();
        let q = pr_projection(&f.normalize().unwrap()).unwrap().q;
        let reference = group(&f, REFERENCE);
        let others = [
            (0, 2.35, 2.60, 3.37),
            (1, 0.54, 1.28, 1.14),
            (3, 1.13, 1.47, 1.54),
        ];
        let ok = Event::parse(f.schema(), "successful").unwrap();
        for (i, of, oq, mh) in others {
            let g = group(&f, TREATMENTS[i]);
            close(
                or_of(&f, "successful", &g, &reference),
                of,
                0.01,
                TREATMENTS[i],
            );
            close(
                or_of(&q, "successful", &g, &reference),
                oq,
                0.01,
                TREATMENTS[i],
            );
            let strata = strata_2x2(&f, ok, &g, &reference).unwrap();
            close(
                mantel_haenszel_or(&strata).unwrap(),
                mh,
                0.01,
                TREATMENTS[i],
            );
        }
    }

    #[test]
    fn stone_size_imbalance() {
        let f = fixtures::kidney1986().unwrap();
        let large = at(&f, &[("stone_size", "large")]);
        let small = at(&f, &[("stone_size", "small")]);
        for (x, want) in TREATMENTS.iter().zip([0.61, 16.77, 0.30, 1.45]) {
            let v = profile_ratio(&f, &group(&f, x), &large, &small)
                .unwrap()
                .value()
                .unwrap();
            close(v, want, 0.01, x);
        }
        assert_eq!(f.mass(&large), 467.0);
        assert_eq!(f.mass(&small), 518.0);
        let q = pr_projection(&f.normalize().unwrap()).unwrap().q;
        for x in TREATMENTS {
            let v = profile_ratio(&q, &group(&q, x), &large, &small)
                .unwrap()
                .value()
                .unwrap();
            close(v, 467.0 / 518.0, 1e-9, x);
        }
        close(
            or_of(&f, "successful", &small, &large),
            3.51,
            0.01,
            "size OR",
        );
    }

    #[test]
    fn size_outcome_association() {
        let f = fixtures::kidney1986().unwrap();
        let s = f.schema();
        let test = chi_square_independence(
            &f,
            &s.select(&["stone_size"]).unwrap(),
            &s.select(&["outcome"]).unwrap(),
        )
        .unwrap();
        assert_eq!(test.dof, 1);
        assert!(test.p_value < 1e-11, "p = {}", test.p_value);
        assert!(test.p_value > 0.0);
    }

    #[test]
    fn group_fisher_tests() {
        let f = fixtures::kidney1986().unwrap();
        let ok = Event::parse(f.schema(), "successful").unwrap();
        let reference = group(&f, REFERENCE);
        for (i, want) in [(0, 0.0004), (1, 0.003), (3, 0.87)] {
            let t = collapsed_2x2(&f, ok, &group(&f, TREATMENTS[i]), &reference);
            let p = fisher_exact_2x2(&t).unwrap();
            assert!((p / want - 1.0).abs() <= 0.3, "{}: p = {p}", TREATMENTS[i]);
        }
    }
}
