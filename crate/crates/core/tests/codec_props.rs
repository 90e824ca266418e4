use mwmodem::codec::{
    self, decode_values, encode_message, estimate_bins_per_bit, CodecError, FramingConfig, ThresholdMode, WienState,
};
use proptest::prelude::*;

const HIGH: f64 = 0.6;
const LOW: f64 = 0.271;

fn noiseless(text: &str, framing: &FramingConfig) -> Vec<f64> {
    let schedule = encode_message(text, framing).unwrap();
    schedule.bins().into_iter().map(|s| if s == WienState::High { HIGH } else { LOW }).collect()
}

fn ones_fraction(text: &str, framing: &FramingConfig) -> f64 {
    let s = encode_message(text, framing).unwrap();
    s.bits.ones() as f64 / s.bits.len() as f64
}

/// A mean-fraction cutoff splits noiseless bars iff it lands in `(LOW, HIGH]`;
/// `f` is the fraction of `1` bits.
fn mean_cutoff_separates(f: f64, q: f64) -> bool {
    let cutoff = q * (f * HIGH + (1.0 - f) * LOW);
    LOW < cutoff && cutoff <= HIGH
}

fn latin1() -> impl Strategy<Value = String> {
    proptest::collection::vec(1u8..=255, 0..24).prop_map(|v| v.into_iter().map(char::from).collect())
}

proptest! {
    #[test]
    fn two_cluster_round_trip(text in latin1()) {
        let framing = FramingConfig { threshold_mode: ThresholdMode::TwoCluster, ..FramingConfig::default() };
        let d = decode_values(&noiseless(&text, &framing), &framing, None).unwrap();
        prop_assert_eq!(d.text, text);
    }

    #[test]
    fn mean_fraction_round_trip(text in latin1()) {
        let framing = FramingConfig::default();
        prop_assume!(mean_cutoff_separates(ones_fraction(&text, &framing), framing.cutoff_factor));
        let d = decode_values(&noiseless(&text, &framing), &framing, None).unwrap();
        prop_assert_eq!(d.text, text);
    }

    #[test]
    fn decoding_is_scale_invariant(text in "[ -~]{1,16}", scale in 0.01f64..100.0) {
        let framing = FramingConfig::default();
        let v = noiseless(&text, &framing);
        let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
        let a = decode_values(&v, &framing, None);
        let b = decode_values(&scaled, &framing, None);
        match (a, b) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(&a.text, &b.text);
                prop_assert_eq!(a.bits, b.bits);
            }
            (Err(a), Err(b)) => prop_assert_eq!(a.is_framing(), b.is_framing()),
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.map(|d| d.text), b.map(|d| d.text)),
        }
    }

    #[test]
    fn bit_length_is_recovered(text in "[ -~]{1,12}", bpb in 3usize..=10, lead in 0usize..7) {
        let framing = FramingConfig { bins_per_bit: bpb, ..FramingConfig::default() };
        let mut v = vec![LOW; lead];
        v.extend(noiseless(&text, &framing));
        let (width, start) = estimate_bins_per_bit(&v).unwrap();
        prop_assert_eq!(width, bpb);
        prop_assert_eq!(start, lead + 4 * bpb);
        let reading = FramingConfig { threshold_mode: ThresholdMode::TwoCluster, ..FramingConfig::default() };
        let d = decode_values(&v, &reading, None).unwrap();
        prop_assert_eq!(d.bins_per_bit, bpb);
        prop_assert_eq!(d.offset, lead);
        prop_assert_eq!(d.text, text);
    }

    #[test]
    fn schedule_length(text in "[ -~]{0,40}") {
        let framing = FramingConfig::default();
        let s = encode_message(&text, &framing).unwrap();
        prop_assert_eq!(s.len_bins(), framing.schedule_bins(text.chars().count()));
        prop_assert_eq!(s.len_bins(), 5 * (12 + 8 * text.len()));
    }
}

#[test]
fn reference_message_is_nine_hundred_bins() {
    let s = encode_message("Matterwave modulation", &FramingConfig::default()).unwrap();
    assert_eq!(s.len_bins(), 900);
    let setpoints = codec::schedule_to_setpoints(&s, -15.0, -45.0);
    assert_eq!(setpoints.len(), 900);
    assert!(setpoints[..20].iter().all(|&u| u == -45.0) && setpoints[20..25].iter().all(|&u| u == -15.0));
}

#[test]
fn framing_failures_are_reported() {
    let framing = FramingConfig::default();
    assert!(matches!(decode_values(&[0.5; 200], &framing, None), Err(CodecError::NoStartPulse)));
    assert!(encode_message("é€", &framing).is_err());
    let mut v = noiseless("hi", &framing);
    v.truncate(v.len() - 10);
    assert!(decode_values(&v, &framing, None).unwrap_err().is_framing());
}
