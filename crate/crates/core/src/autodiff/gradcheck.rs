use crate::error::{Error, Result};

use super::tape::{Tape, Var};

/// Relu/abs inputs within this of zero mark a coordinate as sitting on a kink.
pub const KINK_TOLERANCE: f64 = 1e-6;

/// Lower bound on the denominator of the relative error, so coordinates with
/// vanishing gradients are compared in absolute terms.
pub const GRADCHECK_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates skipped because a perturbation crossed a relu/abs kink.
    pub excluded: usize,
    /// Worst coordinate as (input position, flat index, analytic, numeric).
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Compares reverse-mode gradients of the `1×1` output against central
/// differences with step `step`, for every entry of every leaf in `inputs`.
///
/// Relative error is `|a - n| / max(|a|, |n|, GRADCHECK_FLOOR)`. The tape is
/// restored to its original values on return.
pub fn finite_difference_check(
    tape: &mut Tape,
    inputs: &[Var],
    output: Var,
    step: f64,
) -> Result<GradCheckReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {step}")));
    }
    tape.replay()?;
    let grads = tape.backward(output)?;
    let base_sig = tape.kink_signature(KINK_TOLERANCE);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        excluded: 0,
        worst: None,
    };
    for (pos, &x) in inputs.iter().enumerate() {
        let original = tape.value(x).clone();
        let analytic = grads
            .get(x)
            .cloned()
            .unwrap_or_else(|| crate::tensor::Tensor::zeros(original.rows(), original.cols()));
        for i in 0..original.len() {
            let mut eval = |delta: f64| -> Result<(f64, Vec<i8>)> {
                let mut t = original.clone();
                t.data_mut()[i] += delta;
                tape.set_value(x, t)?;
                tape.replay()?;
                Ok((tape.value(output).item(), tape.kink_signature(KINK_TOLERANCE)))
            };
            let (fp, sp) = eval(step)?;
            let (fm, sm) = eval(-step)?;
            // a kink input that moves into, out of, or across the zero band
            if sp != base_sig || sm != base_sig {
                report.excluded += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * step);
            let a = analytic.data()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((pos, i, a, numeric));
            }
        }
        tape.set_value(x, original)?;
    }
    tape.replay()?;
    Ok(report)
}
