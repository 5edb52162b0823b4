use super::Observable;
use crate::{Error, Result};

/// Maps joint electronic populations onto a detection outcome probability.
///
/// `joint[s]` is the probability of spin configuration `s`, where bit `j` of
/// `s` set means ion `j` is excited. The length must be a power of two.
pub fn detection_observable(joint: &[f64], observable: Observable) -> Result<f64> {
    if joint.is_empty() || !joint.len().is_power_of_two() {
        return Err(Error::invalid("joint populations", "length must be 2^ions"));
    }
    let mask = detection_mask(joint.len().trailing_zeros() as usize, observable)?;
    let p: f64 = joint.iter().zip(&mask).filter(|(_, m)| **m).map(|(p, _)| p).sum();
    Ok(p.clamp(0.0, 1.0))
}

/// Spin configurations counted by `observable`; every observable is a sum of
/// joint populations over such a set.
pub(crate) fn detection_mask(ions: usize, observable: Observable) -> Result<Vec<bool>> {
    let all = (1usize << ions) - 1;
    if let Observable::SingleIon(j) = observable {
        if j >= ions {
            return Err(Error::invalid("observable", format!("ion {j} does not exist in a {ions}-ion crystal")));
        }
    }
    Ok((0..=all)
        .map(|s| match observable {
            Observable::SingleIon(j) => s & (1 << j) != 0,
            Observable::BothExcited => s == all,
            Observable::AtLeastOneBright => s != all,
            Observable::AnyExcited => s != 0,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_state() {
        let joint = [0.25, 0.25, 0.25, 0.25];
        assert_relative_eq!(detection_observable(&joint, Observable::BothExcited).unwrap(), 0.25);
        assert_relative_eq!(detection_observable(&joint, Observable::AtLeastOneBright).unwrap(), 0.75);
        assert_relative_eq!(detection_observable(&joint, Observable::AnyExcited).unwrap(), 0.75);
        assert_relative_eq!(detection_observable(&joint, Observable::SingleIon(1)).unwrap(), 0.5);
    }

    #[test]
    fn single_excitation_is_never_doubly_excited() {
        let joint = [0.0, 0.5, 0.5, 0.0];
        assert_eq!(detection_observable(&joint, Observable::BothExcited).unwrap(), 0.0);
        assert_eq!(detection_observable(&joint, Observable::AnyExcited).unwrap(), 1.0);
    }

    #[test]
    fn bad_inputs() {
        assert!(detection_observable(&[0.5, 0.5, 0.0], Observable::BothExcited).is_err());
        assert!(detection_observable(&[0.5, 0.5], Observable::SingleIon(1)).is_err());
    }
}
