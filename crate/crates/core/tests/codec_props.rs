use proptest::prelude::*;

use rune_core::tensor::{
    decode_tensor, encode_tensor, read_varint_u32, write_varint_u32, Codec, DType, Tensor,
};

fn arb_dtype() -> impl Strategy<Value = DType> {
    prop_oneof![Just(DType::F32), Just(DType::U8), Just(DType::I32)]
}

fn arb_tensor() -> impl Strategy<Value = Tensor> {
    (arb_dtype(), prop::collection::vec(1u32..=8, 1..=4)).prop_flat_map(|(dtype, dims)| {
        let count: usize = dims.iter().map(|&d| d as usize).product();
        let bytes = count * dtype.element_size();
        prop::collection::vec(any::<u8>(), bytes)
            .prop_map(move |payload| Tensor::new(dtype, dims.clone(), payload).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fixed_round_trip(t in arb_tensor()) {
        let bytes = encode_tensor(&t, Codec::Fixed);
        prop_assert_eq!(decode_tensor(&bytes, Codec::Fixed).unwrap(), t);
    }

    #[test]
    fn varint_round_trip(t in arb_tensor()) {
        let bytes = encode_tensor(&t, Codec::Varint);
        prop_assert_eq!(decode_tensor(&bytes, Codec::Varint).unwrap(), t);
    }

    #[test]
    fn fixed_size_is_exact(t in arb_tensor()) {
        let bytes = encode_tensor(&t, Codec::Fixed);
        prop_assert_eq!(bytes.len(), 2 + 4 * t.rank() + t.payload().len());
    }

    #[test]
    fn varint_u32_round_trip(v in any::<u32>()) {
        let mut buf = Vec::new();
        write_varint_u32(&mut buf, v);
        prop_assert!(buf.len() <= 5);
        let mut pos = 0;
        prop_assert_eq!(read_varint_u32(&buf, &mut pos).unwrap(), v);
        prop_assert_eq!(pos, buf.len());
    }

    #[test]
    fn fixed_rejects_truncation(t in arb_tensor()) {
        let bytes = encode_tensor(&t, Codec::Fixed);
        for cut in 0..bytes.len() {
            prop_assert!(decode_tensor(&bytes[..cut], Codec::Fixed).is_err());
        }
    }
}

#[test]
fn fixed_zero_scalar_layout() {
    let bytes = encode_tensor(&Tensor::scalar_f32(0.0), Codec::Fixed);
    assert_eq!(bytes, [0x00, 0x01, 0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00]);
}

#[test]
fn varint_300_is_two_bytes() {
    let mut buf = Vec::new();
    write_varint_u32(&mut buf, 300);
    assert_eq!(buf, [0xAC, 0x02]);
}
