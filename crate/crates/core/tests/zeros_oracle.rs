mod common;

use common::{c, companion_roots};
use gafsim::fock::{BasisModel, BasisOptions, KernelModel};
use gafsim::geometry::{Disc, Rect, Region};
use gafsim::measure::Weight;
use gafsim::pointprocess::GafSample;
use gafsim::rng::{stream_id, Domain};
use gafsim::zeros::{count_zeros_argument, locate_zeros};

#[test]
fn located_zeros_match_companion_roots() {
    for alpha in [2.0, 3.0] {
        let w = Weight::radial_power(alpha).unwrap();
        let model = BasisModel::build(&w, 6.0, 1.0, BasisOptions::default()).unwrap();
        let region = Rect::new(-0.6, 0.6, -0.6, 0.6);
        let tol = 1e-10 * model.rho_field().rho(c(0.0, 0.0)).unwrap();
        for t in 0..20 {
            let g = GafSample::basis(&model, 11, stream_id(Domain::Coefficients, 0, t));
            let zs = locate_zeros(&g, &Region::Rect(region), tol).unwrap();
            let mut oracle: Vec<_> = companion_roots(&model, g.series(), 0.85)
                .into_iter()
                .filter(|z| region.contains(*z))
                .collect();
            oracle.sort_by(|a, b| a.re.total_cmp(&b.re));
            assert_eq!(zs.len(), oracle.len(), "alpha={alpha} trial {t}");
            for z in &zs.zeros {
                let d = oracle.iter().map(|o| (o - z).norm()).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-8, "alpha={alpha} trial {t}: zero {z} is {d:e} from the oracle");
            }
        }
    }
}

#[test]
fn disc_counts_match_companion_roots() {
    let w = Weight::radial_power(2.0).unwrap();
    let model = KernelModel::Basis(BasisModel::build(&w, 10.0, 1.0, BasisOptions::default()).unwrap());
    for t in 0..50 {
        let g = GafSample::sample(&model, 3, stream_id(Domain::Coefficients, 1, t), &Rect::square(c(0.0, 0.0), 0.7))
            .unwrap();
        let disc = Disc::new(c(0.05 * (t % 3) as f64, -0.02 * (t % 5) as f64), 0.55);
        let n = count_zeros_argument(&g, &disc).unwrap();
        let roots = companion_roots(model.basis(), g.series(), 0.7);
        let expected = roots.iter().filter(|z| disc.contains(**z)).count();
        assert_eq!(n, expected, "trial {t}");
    }
}
