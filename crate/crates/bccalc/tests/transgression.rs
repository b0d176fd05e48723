//! Exact verification of the metric-family transgression identities.

use std::sync::Arc;

use bccalc::bundle::{GradedBundle, HermitianMetric, MatF, Poly};
use bccalc::chern::ChernPair;
use bccalc::corpus;
use bccalc::families::*;
use bccalc::form::Form;
use bccalc::jet::{Jet, JetRing, ParamSpec, Var};
use bccalc::scalar::Exact;
use bccalc::superconn::CohesiveModule;

fn assert_all_pass(checks: &[bccalc::check::CheckOutcome], label: &str) {
    for c in checks {
        assert!(
            c.passed,
            "{label}: check `{}` failed, defect {:.3e} at {}",
            c.name, c.max_defect, c.location
        );
        assert!(
            c.valid_order.map_or(true, |v| v >= 1) || c.passed,
            "{label}: `{}` validated at order 0",
            c.name
        );
    }
}

/// Rank-1 trivial module with h = 1 + t·zz̄ (+ s·2zz̄): chart-nilpotent
/// parameter dependence, so the suite runs symbolically in the parameters.
fn conformal_family(nparams: usize) -> MetricFamily<Exact> {
    let mut specs = vec![ParamSpec::polynomial("t")];
    if nparams > 1 {
        specs.push(ParamSpec::polynomial("s"));
    }
    let ring = JetRing::with_params(1, 4, specs);
    let bundle = GradedBundle::new([(0, 1)]);
    let module = CohesiveModule::new(
        bundle.clone(),
        bccalc::bundle::EndForm::zero_end(&ring, &bundle),
    )
    .unwrap();
    let z = Jet::var(&ring, Var::Z(0));
    let zb = Jet::var(&ring, Var::Zb(0));
    let zz = z.mul(&zb);
    let t = Jet::var(&ring, Var::Param(0));
    let mut hval = Jet::one(&ring).add(&t.mul(&zz));
    if nparams > 1 {
        let s = Jet::var(&ring, Var::Param(1));
        hval = hval.add(&s.mul(&zz).scale(&Exact::from_int(2)));
    }
    let mut blk = MatF::zeros(&ring, 1, 1);
    blk[(0, 0)] = Form::from_jet(hval);
    let mut blocks = std::collections::BTreeMap::new();
    blocks.insert(0, blk);
    let h = HermitianMetric::new(&ring, &bundle, blocks).unwrap();
    MetricFamily::new(module, h, (0..nparams).collect()).unwrap()
}

#[test]
fn suite_on_conformal_one_parameter_family() {
    let fam = conformal_family(1);
    for f in [Poly::<Exact>::monomial(1), Poly::monomial(2)] {
        let checks = metric_transgression_suite(&fam, &f).unwrap();
        assert_all_pass(&checks, "conformal 1-param");
    }
}

#[test]
fn suite_on_conformal_two_parameter_family() {
    let fam = conformal_family(2);
    let checks = metric_transgression_suite(&fam, &Poly::monomial(2)).unwrap();
    assert_all_pass(&checks, "conformal 2-param");
}
