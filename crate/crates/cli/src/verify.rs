//! The `verify` subcommand: named check suites printed as a pass/fail
//! table. Exit 0 when everything passes, 2 on failures, 1 on errors.

use num_complex::Complex64;
use rand::Rng;
use std::path::Path;

use hypoprop::battery;
use hypoprop::gridprop::{
    commutation_residual, fresnel_mass, grid_propagate, grid_sample_packet, suggest_geometry,
    FresnelMode, Interpolation, PropagationSettings,
};
use hypoprop::matcore::{self, SystemPair};
use hypoprop::packets::GaussianPacket;
use hypoprop::Error;

use crate::{fmt, load_system};

struct Table {
    rows: Vec<(bool, String)>,
}

impl Table {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    fn record(&mut self, name: &str, ok: bool, measured: f64, tol: f64) {
        self.rows.push((
            ok,
            format!(
                "{} {name}: {} (tolerance {})",
                if ok { "PASS" } else { "FAIL" },
                fmt(measured),
                fmt(tol)
            ),
        ));
    }

    fn note(&mut self, text: String) {
        self.rows.push((true, text));
    }

    fn finish(self) -> u8 {
        let mut all_ok = true;
        for (ok, line) in &self.rows {
            println!("{line}");
            all_ok &= ok;
        }
        if all_ok {
            0
        } else {
            2
        }
    }
}

fn grid_settings(margin: f64) -> PropagationSettings {
    PropagationSettings {
        interpolation: Interpolation::FourierZeroPad,
        margin_factor: Some(margin),
        chirp_resolution_guard: false,
    }
}

fn covariance_suite(table: &mut Table, sys: &SystemPair, seed: u64) -> hypoprop::Result<()> {
    let mut rng = battery::rng_from_seed(seed);
    let mut add_defect: f64 = 0.0;
    let mut id_defect: f64 = 0.0;
    let mut mono_defect: f64 = 0.0;
    for _ in 0..100 {
        let rnd = battery::random_system(&mut rng, 3);
        let t = rng.random_range(0.05..2.0);
        let s = rng.random_range(0.05..2.0);
        let q_ts = matcore::covariance(&rnd, t + s)?;
        let q_t = matcore::covariance(&rnd, t)?;
        let q_s = matcore::covariance(&rnd, s)?;
        let flow = matcore::mat_exp(rnd.b(), t)?;
        let composed = q_t.value() + &flow * q_s.value() * flow.transpose();
        add_defect = add_defect
            .max((q_ts.value() - composed).amax() / (1.0 + q_ts.value().amax()));
        let growth = q_ts.value() - q_t.value();
        mono_defect = mono_defect.max(-matcore::sym_lambda_min(&growth));
        let back = matcore::mat_exp(rnd.b(), -t)?;
        let lhs = &back * rnd.q() * back.transpose();
        let core = &back * q_t.value() * back.transpose();
        let rhs = rnd.q() - rnd.b() * &core - &core * rnd.b().transpose();
        id_defect = id_defect.max((lhs - rhs).amax());
    }
    table.record("covariance additivity (random 3x3)", add_defect <= 1e-10, add_defect, 1e-10);
    table.record("covariance monotonicity (random 3x3)", mono_defect <= 1e-10, mono_defect, 1e-10);
    table.record("covariance flow identity (random 3x3)", id_defect <= 1e-9, id_defect, 1e-9);

    let vl = matcore::covariance(sys, 1.0)?;
    let quad = matcore::covariance_quad(sys, 1.0, 32)?;
    let defect = (vl.value() - &quad).amax() / (1.0 + vl.value().amax());
    table.record("Van Loan vs quadrature (loaded system)", defect <= 1e-9, defect, 1e-9);
    Ok(())
}

fn norm_suite(table: &mut Table, sys: &SystemPair, seed: u64) -> hypoprop::Result<()> {
    let mut rng = battery::rng_from_seed(seed);
    let mut packet_defect: f64 = 0.0;
    for _ in 0..10 {
        let p = battery::random_packet(&mut rng, sys.dim());
        let t = rng.random_range(0.2..2.0);
        let ratio = p.propagate(sys, t)?.norm_l2() / p.norm_l2();
        let expected = (-t * sys.trace_b() / 2.0).exp();
        packet_defect = packet_defect.max((ratio / expected - 1.0).abs());
    }
    table.record("norm identity, packet oracle", packet_defect <= 1e-10, packet_defect, 1e-10);

    if sys.dim() <= 2 {
        let t = 0.5;
        let p = GaussianPacket::isotropic(sys.dim(), 1.0);
        let (l, n, margin) = suggest_geometry(&p, sys, t, 5.0, 2.0)?;
        let f = grid_sample_packet(&p, &l, n)?;
        let out = grid_propagate(&f, sys, t, &grid_settings(margin))?;
        let expected = (-t * sys.trace_b() / 2.0).exp();
        let defect = (out.norm_l2() / f.norm_l2() / expected - 1.0).abs();
        table.record("norm identity, grid backend", defect <= 1e-4, defect, 1e-4);
    } else {
        table.note("SKIP norm identity, grid backend (m > 2)".into());
    }
    Ok(())
}

fn semigroup_suite(table: &mut Table, sys: &SystemPair, seed: u64) -> hypoprop::Result<()> {
    let mut rng = battery::rng_from_seed(seed);
    let mut defect: f64 = 0.0;
    for _ in 0..10 {
        let p = battery::random_packet(&mut rng, sys.dim());
        let s = rng.random_range(0.1..1.0);
        let t = rng.random_range(0.1..1.0);
        let direct = p.propagate(sys, s + t)?;
        let composed = p.propagate(sys, t)?.propagate(sys, s)?;
        let scale = direct.exponent().iter().map(|z| z.norm()).fold(1.0, f64::max);
        let m_err = (direct.exponent() - composed.exponent())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            / scale;
        let c_err = (direct.amplitude() - composed.amplitude()).norm()
            / direct.amplitude().norm().max(1.0);
        defect = defect.max(m_err).max(c_err);
    }
    table.record("semigroup law, packet parameters", defect <= 1e-10, defect, 1e-10);
    Ok(())
}

fn commutation_suite(table: &mut Table, sys: &SystemPair) -> hypoprop::Result<()> {
    if sys.dim() > 2 {
        table.note("SKIP commutation residual (m > 2)".into());
        return Ok(());
    }
    let t = 0.5;
    let p = GaussianPacket::isotropic(sys.dim(), 1.0);
    let (l, n, margin) = suggest_geometry(&p, sys, t, 5.5, 3.0)?;
    let f = grid_sample_packet(&p, &l, n.max(1024))?;
    let r = commutation_residual(&f, sys, t, &grid_settings(margin))?;
    table.record("generator commutes with the propagator", r <= 1e-4, r, 1e-4);
    Ok(())
}

fn fresnel_suite(table: &mut Table, sys: &SystemPair) -> hypoprop::Result<()> {
    if sys.dim() > 2 {
        table.note("SKIP Fresnel mass (m > 2)".into());
        return Ok(());
    }
    let eps = 1e-3;
    let origin = vec![0.0; sys.dim()];
    match fresnel_mass(sys, 1.0, &origin, eps, None, FresnelMode::OverY) {
        Ok(y) => {
            let err = (y - Complex64::from(1.0)).norm();
            table.record("Fresnel mass over y -> 1", err <= 0.01, err, 0.01);
        }
        Err(Error::Resolution(_)) => {
            table.note("SKIP Fresnel mass over y (needs finer grid than the cap)".into());
        }
        Err(e) => return Err(e),
    }
    match fresnel_mass(sys, 1.0, &origin, eps, None, FresnelMode::OverX) {
        Ok(x) => {
            let target = Complex64::from((-sys.trace_b()).exp());
            let err = (x - target).norm() / target.norm();
            table.record("Fresnel mass over x -> e^{-t tr B}", err <= 0.01, err, 0.01);
        }
        Err(Error::Resolution(_)) => {
            table.note("SKIP Fresnel mass over x (needs finer grid than the cap)".into());
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

pub(crate) fn cmd_verify(system: &Path, suite: &str, seed: u64) -> hypoprop::Result<u8> {
    let sys = load_system(system)?;
    let report = matcore::hypoelliptic(&sys, 1.0, matcore::HYPO_TOL)?;
    if !report.hypoelliptic && suite != "covariance" {
        return Err(Error::Singular(
            "verification suites beyond 'covariance' need a hypoelliptic system".into(),
        ));
    }
    let mut table = Table::new();
    match suite {
        "covariance" => covariance_suite(&mut table, &sys, seed)?,
        "norm" => norm_suite(&mut table, &sys, seed)?,
        "semigroup" => semigroup_suite(&mut table, &sys, seed)?,
        "commutation" => commutation_suite(&mut table, &sys)?,
        "fresnel" => fresnel_suite(&mut table, &sys)?,
        "all" => {
            covariance_suite(&mut table, &sys, seed)?;
            norm_suite(&mut table, &sys, seed)?;
            semigroup_suite(&mut table, &sys, seed)?;
            commutation_suite(&mut table, &sys)?;
            fresnel_suite(&mut table, &sys)?;
        }
        other => {
            return Err(Error::Parse(format!(
                "unknown suite {other:?}; expected covariance | norm | semigroup | commutation | fresnel | all"
            )))
        }
    }
    Ok(table.finish())
}
