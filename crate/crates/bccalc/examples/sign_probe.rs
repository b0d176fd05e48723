use bccalc::bundle::{series_eval, GradedBundle, HermitianMetric, MatF, Poly};
use bccalc::families::*;
use bccalc::form::{Diff, Form};
use bccalc::jet::{Jet, JetRing, ParamSpec, Var};
use bccalc::scalar::Exact;
use bccalc::superconn::CohesiveModule;

fn main() {
    let ring = JetRing::with_params(1, 4, vec![ParamSpec::polynomial("t")]);
    let bundle = GradedBundle::new([(0, 1)]);
    let module = CohesiveModule::new(
        bundle.clone(),
        bccalc::bundle::EndForm::zero_end(&ring, &bundle),
    )
    .unwrap();
    let z = Jet::var(&ring, Var::Z(0));
    let zb = Jet::var(&ring, Var::Zb(0));
    let t = Jet::var(&ring, Var::Param(0));
    let hval = Jet::one(&ring).add(&t.mul(&z.mul(&zb)));
    let mut blk = MatF::zeros(&ring, 1, 1);
    blk[(0, 0)] = Form::from_jet(hval);
    let mut blocks = std::collections::BTreeMap::new();
    blocks.insert(0, blk);
    let h = HermitianMetric::new(&ring, &bundle, blocks).unwrap();
    let fam = MetricFamily::new(module, h, vec![0]).unwrap();

    let pair = fam.chern().unwrap();
    let theta = fam.theta().unwrap();
    let r = pair.curvature().unwrap();
    for deg in [1usize, 2] {
        let f = Poly::<Exact>::monomial(deg);
        let fp = f.derivative();
        let fpr = series_eval(&fp, &r);
        let ad_p = pair.bracket_prime(&theta).unwrap();
        let lhs = series_eval(&f, &r).supertrace().d(Diff::DParam).unwrap();
        let w1 = fpr.mul(&ad_p).supertrace();
        let w2 = fpr.mul(&theta).supertrace();
        println!("== f = T^{deg}");
        println!("d^M str f(R)          : {}", lhs);
        println!("+∂̄ w1                : {}", w1.d(Diff::Delbar).unwrap());
        println!("∂ w2                  : {}", w2.d(Diff::Del).unwrap());
        println!("w1                    : {}", w1);
        println!("∂∂̄ w2               : {}", w2.d(Diff::Delbar).unwrap().d(Diff::Del).unwrap());
        println!("∂̄∂ w2               : {}", w2.d(Diff::Del).unwrap().d(Diff::Delbar).unwrap());
    }
}
