use dosq::codec::{
    decode, decode_packed, encode, encode_error, evolve_post, evolve_pre, init, CodecState, Phase,
    QuantizationIndex,
};
use dosq::dynamics::lookup;
use dosq::scaled::{Magnitude, ScaledVec};
use proptest::prelude::*;

fn dims_and_bits() -> impl Strategy<Value = (usize, u32)> {
    (1usize..=4).prop_flat_map(|n| (Just(n), 1u32..=(64 / n as u32)))
}

proptest! {
    #[test]
    fn pack_unpack_is_a_bijection((n, bits) in dims_and_bits(), raw in prop::collection::vec(any::<u64>(), 4)) {
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        let digits: Vec<u64> = raw[..n].iter().map(|d| d & mask).collect();
        let idx = QuantizationIndex { digits };
        let packed = idx.pack(bits);
        if n as u32 * bits < 64 {
            prop_assert!(packed < 1u64 << (n as u32 * bits));
        }
        prop_assert_eq!(QuantizationIndex::unpack(packed, n, bits).unwrap(), idx);
    }

    #[test]
    fn centroid_error_is_within_half_cell(bits in 1u32..=12, xhat in -2.0f64..2.0, l in 1e-3f64..4.0, frac in 0.0f64..=1.0) {
        let s = CodecState {
            xhat: vec![xhat],
            range: Magnitude::from_f64(l),
            phase: Phase::PostFirstSuccess,
            bits,
            n: 1,
        };
        let x = xhat - l / 2.0 + frac * l;
        let (idx, next) = encode(&s, &[x]).unwrap();
        let bound = l / 2f64.powi(bits as i32 + 1);
        prop_assert!((x - next.xhat[0]).abs() <= bound * (1.0 + 1e-9) + 1e-15);
        prop_assert_eq!(decode(&s, &idx).unwrap(), next);
    }

    #[test]
    fn phimax_monotone_range_is_monotone(steps in prop::collection::vec(0.0f64..0.5, 1..20)) {
        let mut s = init(0.65, 3, 1).unwrap();
        let mut phi = 0.65;
        for d in steps {
            phi += d;
            let next = evolve_pre(&s, 0.0, phi).unwrap();
            prop_assert!(next.range_f64() >= s.range_f64());
            s = next;
        }
    }

    /// Paired states fed the same events stay bit-identical, and the range
    /// follows the closed-form contraction bookkeeping.
    #[test]
    fn encoder_decoder_synchrony(bits in 1u32..=8,
            events in prop::collection::vec((any::<bool>(), 0.0f64..0.3, -1.0f64..1.0), 1..12)) {
        let sys = lookup("linear-contracting").unwrap();
        let f = 7.0f64;
        let mut enc = init(0.65, bits, 1).unwrap();
        let mut dec = enc.clone();
        let mut successes = 0i32;
        let mut elapsed = 0.0f64;
        let mut base = None;
        let mut phi = 0.65;
        for (success, dt, pos) in events {
            if success {
                // error relative to the range, as the loop feeds it
                let e = ScaledVec::from_parts(vec![pos * 0.5 * enc.range.mantissa()], enc.range.exp2());
                if base.is_none() {
                    base = Some(enc.range_f64());
                }
                let (idx, e2, _) = encode_error(&enc, &e).unwrap();
                let d2 = decode_packed(&dec, idx.pack(bits)).unwrap();
                prop_assert_eq!(&e2, &d2);
                enc = e2;
                dec = d2;
                successes += 1;
                let expect = base.unwrap() * (f * elapsed).exp() / 2f64.powi(bits as i32 * successes);
                prop_assert!((enc.range_f64() / expect - 1.0).abs() < 1e-9);
            } else if enc.phase == Phase::PreFirstSuccess {
                phi += dt;
                enc = evolve_pre(&enc, 0.0, phi).unwrap();
                dec = evolve_pre(&dec, 0.0, phi).unwrap();
            } else {
                enc = evolve_post(&enc, dt, f, &*sys.plant, &*sys.cert, 1e-3).unwrap();
                dec = evolve_post(&dec, dt, f, &*sys.plant, &*sys.cert, 1e-3).unwrap();
                elapsed += dt;
            }
            prop_assert_eq!(&enc, &dec);
        }
    }

    #[test]
    fn scaled_error_encoding_matches_plain(bits in 1u32..=16, l in 1e-3f64..4.0, frac in 0.0f64..=1.0) {
        let s = CodecState {
            xhat: vec![0.0],
            range: Magnitude::from_f64(l),
            phase: Phase::PostFirstSuccess,
            bits,
            n: 1,
        };
        let e = (frac - 0.5) * l;
        let (a, sa) = encode(&s, &[e]).unwrap();
        let (b, sb, offset) = encode_error(&s, &ScaledVec::from_f64(&[e])).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(&sa, &sb);
        let rest = ScaledVec::from_f64(&[e]).sub(&offset);
        prop_assert!(rest.norm_inf().ratio(&sb.range) <= 0.5 + 1e-9);
    }
}
