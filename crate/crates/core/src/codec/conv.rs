//! Rate-1/3, constraint-length-7 feedforward convolutional code with
//! zero-tail termination and a soft-input Viterbi decoder.
//!
//! LLRs follow the convention `llr = ln P(bit=0) / P(bit=1)`, so a
//! positive value favours 0.

use super::CodecError;

pub const CONSTRAINT_LENGTH: usize = 7;
pub const GENERATORS_OCTAL: [u32; 3] = [0o133, 0o171, 0o165];

const MEMORY: usize = CONSTRAINT_LENGTH - 1;
const STATES: usize = 1 << MEMORY;
const RATE_INV: usize = GENERATORS_OCTAL.len();

/// Number of coded bits for `k` information bits.
pub const fn coded_len(k: usize) -> usize {
    RATE_INV * (k + MEMORY)
}

// The register holds the current input in bit 6 and the previous six
// inputs below it, most recent first. The generator MSB taps the input.
#[inline]
fn outputs(reg: u32) -> [u8; RATE_INV] {
    let mut out = [0u8; RATE_INV];
    for (o, g) in out.iter_mut().zip(GENERATORS_OCTAL) {
        *o = ((reg & g).count_ones() & 1) as u8;
    }
    out
}

pub fn conv_encode(bits: &[u8]) -> Result<Vec<u8>, CodecError> {
    if let Some(i) = bits.iter().position(|&b| b > 1) {
        return Err(CodecError::ProtocolViolation(format!("input bit {i} is not binary")));
    }
    let mut state = 0u32;
    let mut out = Vec::with_capacity(coded_len(bits.len()));
    for &b in bits.iter().chain(std::iter::repeat_n(&0u8, MEMORY)) {
        let reg = ((b as u32) << MEMORY) | state;
        out.extend_from_slice(&outputs(reg));
        state = reg >> 1;
    }
    Ok(out)
}

/// Maximum-likelihood decoding of a zero-terminated codeword of `k`
/// information bits. Equal path metrics resolve toward the predecessor
/// whose shifted-out bit is 0.
pub fn viterbi_decode(llrs: &[f64], k: usize) -> Result<Vec<u8>, CodecError> {
    let expected = coded_len(k);
    if llrs.len() != expected {
        return Err(CodecError::ProtocolViolation(format!(
            "viterbi input has {} llrs, expected {expected} for k = {k}",
            llrs.len()
        )));
    }
    let steps = k + MEMORY;

    // branch[reg] = coded bits for the 7-bit register value
    let branch: Vec<[u8; RATE_INV]> = (0..(1u32 << CONSTRAINT_LENGTH)).map(outputs).collect();

    let mut metric = [f64::NEG_INFINITY; STATES];
    metric[0] = 0.0;
    let mut decisions: Vec<[u8; STATES]> = Vec::with_capacity(steps);

    for step in 0..steps {
        let l = &llrs[RATE_INV * step..RATE_INV * (step + 1)];
        let mut next = [f64::NEG_INFINITY; STATES];
        let mut dec = [0u8; STATES];
        for (ns, (slot, d)) in next.iter_mut().zip(dec.iter_mut()).enumerate() {
            let input = (ns >> (MEMORY - 1)) as u32;
            let base = (ns & (STATES / 2 - 1)) << 1;
            let mut best = f64::NEG_INFINITY;
            let mut best_bit = 0u8;
            for dropped in 0..2u8 {
                let prev = base | dropped as usize;
                if metric[prev] == f64::NEG_INFINITY {
                    continue;
                }
                let reg = (input << MEMORY) | prev as u32;
                let bm: f64 =
                    branch[reg as usize].iter().zip(l).map(|(&c, &llr)| if c == 0 { llr } else { -llr }).sum();
                let m = metric[prev] + bm;
                if m > best {
                    best = m;
                    best_bit = dropped;
                }
            }
            *slot = best;
            *d = best_bit;
        }
        metric = next;
        decisions.push(dec);
    }

    let mut state = 0usize;
    let mut decoded = vec![0u8; steps];
    for step in (0..steps).rev() {
        decoded[step] = (state >> (MEMORY - 1)) as u8;
        state = ((state & (STATES / 2 - 1)) << 1) | decisions[step][state] as usize;
    }
    decoded.truncate(k);
    Ok(decoded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn noiseless_llrs(coded: &[u8], scale: f64) -> Vec<f64> {
        coded.iter().map(|&c| if c == 0 { scale } else { -scale }).collect()
    }

    fn generator_bits(g: u32) -> Vec<u8> {
        (0..CONSTRAINT_LENGTH).map(|i| ((g >> (MEMORY - i)) & 1) as u8).collect()
    }

    #[test]
    fn all_zero_maps_to_all_zero() {
        let c = conv_encode(&[0; 48]).unwrap();
        assert_eq!(c.len(), 3 * (48 + 6));
        assert!(c.iter().all(|&b| b == 0));
    }

    #[test]
    fn impulse_gives_generator_response() {
        let c = conv_encode(&[1]).unwrap();
        assert_eq!(c.len(), 21);
        for (j, g) in GENERATORS_OCTAL.iter().enumerate() {
            let stream: Vec<u8> = c.iter().skip(j).step_by(3).copied().collect();
            assert_eq!(stream, generator_bits(*g), "generator {g:o}");
        }
    }

    #[test]
    fn random_47_bits_round_trip() {
        let mut rng = stream_rng(47, &[]);
        for _ in 0..50 {
            let bits: Vec<u8> = (0..47).map(|_| rng.random_range(0..2)).collect();
            let coded = conv_encode(&bits).unwrap();
            assert_eq!(viterbi_decode(&noiseless_llrs(&coded, 1.0), 47).unwrap(), bits);
        }
    }

    #[test]
    fn positive_scaling_does_not_change_decision() {
        let mut rng = stream_rng(3, &[]);
        let bits: Vec<u8> = (0..30).map(|_| rng.random_range(0..2)).collect();
        let coded = conv_encode(&bits).unwrap();
        let mut llrs: Vec<f64> = noiseless_llrs(&coded, 1.0).iter().map(|l| l + rng.random_range(-0.9..0.9)).collect();
        let base = viterbi_decode(&llrs, 30).unwrap();
        for k in [1e-3, 0.5, 7.0, 1e4] {
            llrs.iter_mut().for_each(|l| *l *= k);
            assert_eq!(viterbi_decode(&llrs, 30).unwrap(), base);
            llrs.iter_mut().for_each(|l| *l /= k);
        }
    }

    #[test]
    fn corrects_any_single_flipped_bit() {
        let mut rng = stream_rng(5, &[]);
        let bits: Vec<u8> = (0..20).map(|_| rng.random_range(0..2)).collect();
        let coded = conv_encode(&bits).unwrap();
        for pos in 0..coded.len() {
            let mut llrs = noiseless_llrs(&coded, 8.0);
            llrs[pos] = -llrs[pos];
            assert_eq!(viterbi_decode(&llrs, 20).unwrap(), bits, "flip at {pos}");
        }
    }

    #[test]
    fn all_zero_llrs_tie_break_to_zero() {
        assert_eq!(viterbi_decode(&vec![0.0; coded_len(10)], 10).unwrap(), vec![0; 10]);
    }

    #[test]
    fn length_mismatch_is_protocol_violation() {
        assert!(matches!(viterbi_decode(&[1.0; 10], 47), Err(CodecError::ProtocolViolation(_))));
        assert!(conv_encode(&[0, 2]).is_err());
    }

    proptest! {
        #[test]
        fn code_is_linear(a in prop::collection::vec(0u8..2, 1..60), seed in any::<u64>()) {
            let mut rng = stream_rng(seed, &[]);
            let b: Vec<u8> = (0..a.len()).map(|_| rng.random_range(0..2)).collect();
            let x: Vec<u8> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
            let ca = conv_encode(&a).unwrap();
            let cb = conv_encode(&b).unwrap();
            let cx = conv_encode(&x).unwrap();
            let sum: Vec<u8> = ca.iter().zip(&cb).map(|(p, q)| p ^ q).collect();
            prop_assert_eq!(cx, sum);
        }
    }
}
