use clines_core::stability::{
    assemble_l, assemble_l_adjoint, assemble_m, cosine, relaxation_shift, spectrum, stability_report,
    write_spectrum_csv,
};
use clines_core::standing::{profile_from_quadrature, WaveProfile};

fn profile(dx: f64) -> WaveProfile {
    profile_from_quadrature(0.1, 0.1, 60.0, dx).unwrap()
}

#[test]
fn l_and_m_spectra_agree_up_to_discretisation() {
    let gaps: Vec<f64> = [0.1, 0.05]
        .iter()
        .map(|&dx| {
            let u0 = profile(dx);
            let l = spectrum(&assemble_l(&u0).unwrap(), 3).unwrap();
            let m = spectrum(&assemble_m(&u0).unwrap(), 3).unwrap();
            l.values
                .iter()
                .zip(&m.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(gaps[1] < 1e-5, "{gaps:?}");
    assert!(gaps[1] < gaps[0] / 3.0, "{gaps:?}");
}

#[test]
fn m_leading_vector_is_weighted_translation_mode() {
    let u0 = profile(0.05);
    let m = spectrum(&assemble_m(&u0).unwrap(), 1).unwrap();
    let k = 2.0 * 0.1 / 0.1;
    let weighted: Vec<f64> = (1..u0.len() - 1)
        .map(|i| u0.du[i] * (-k * u0.u[i] * u0.complement[i]).exp())
        .collect();
    assert!(cosine(&m.vectors[0], &weighted) > 0.999);
    assert!(m.values[0].abs() < 1e-3);
}

#[test]
fn adjoint_leading_vector_is_adjoint_kernel() {
    let u0 = profile(0.05);
    let op = assemble_l_adjoint(&u0).unwrap();
    let spec = spectrum(&op, 1).unwrap();
    let psi = clines_core::stability::adjoint_kernel(&u0, true);
    let c = cosine(&spec.vectors[0], &psi[1..psi.len() - 1]);
    assert!(c > 0.999, "{c} {:?}", spec.values);
}

#[test]
fn no_positive_eigenvalues_and_cluster_near_minus_s() {
    let u0 = profile(0.05);
    let spec = spectrum(&assemble_l(&u0).unwrap(), 12).unwrap();
    assert!(spec.values.iter().all(|&v| v <= 1e-3));
    // below the isolated values the discrete continuum starts just under -S
    let last = *spec.values.last().unwrap();
    assert!(last < -0.1 && last > -0.2, "{last}");
}

#[test]
fn report_and_csv() {
    let u0 = profile(0.1);
    let (rep, spec) = stability_report(&u0, 3).unwrap();
    assert!(rep.translation_cosine > 0.999);
    assert!(rep.adjoint_residual_unweighted > 100.0 * rep.adjoint_residual);
    let json = serde_json::to_string(&rep).unwrap();
    assert!(json.contains("\"leading_eigenvalues\""));
    let op = assemble_l(&u0).unwrap();
    let mut buf = Vec::new();
    write_spectrum_csv(&op, &spec, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("x,v0,v1,v2\neigenvalue,"));
    assert_eq!(text.lines().count(), op.x.len() + 2);
}

#[test]
fn bump_shift_matches_normalised_projection() {
    let u0 = profile(0.1);
    let bump: Vec<f64> = u0.x.iter().map(|x| (-x * x).exp()).collect();
    let rep = relaxation_shift(&u0, &bump, 0.01, 0.1, 3000.0).unwrap();
    assert!((rep.measured - rep.predicted_normalized).abs() < 0.02 * rep.predicted_normalized.abs());
    // The unnormalised integral is a different number (scale factor
    // <psi, -u0'>), so it cannot be the shift itself.
    assert!((rep.measured - rep.predicted_raw).abs() > 1.0);
}

#[test]
fn oversized_amplitude_is_rejected() {
    let u0 = profile(0.1);
    let h = vec![0.0; u0.len()];
    assert!(relaxation_shift(&u0, &h, 0.1, 0.1, 100.0).is_err());
}
