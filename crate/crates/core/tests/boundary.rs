//! The codec boundary between pipeline stages must be invisible: running the
//! same pipeline with serialized stage boundaries (either codec) produces
//! bit-identical results to the unserialized baseline.

use std::io;

use rune_core::fixtures::{sine_bundle, sine_graph_and_models};
use rune_core::runefile::CapabilityKind;
use rune_core::runicos::{load, run_native, DeviceProfile, ProviderBinding, ProviderSet};
use rune_core::tensor::Codec;

fn device() -> DeviceProfile {
    DeviceProfile::new(
        "test-device",
        vec![(CapabilityKind::Rand, ProviderBinding::Seeded(0))],
        1 << 20,
    )
    .unwrap()
}

#[test]
fn serialization_boundary_is_transparent() {
    let bundle = sine_bundle();
    let (graph, models) = sine_graph_and_models();

    let mut fixed = load(&bundle, device()).unwrap();
    fixed.manifest().unwrap();
    let mut varint = load(&bundle, device()).unwrap();
    varint.manifest().unwrap();
    let mut providers = ProviderSet::from_profile(&device()).unwrap();

    for seed in 0..100u64 {
        providers.reseed(seed).unwrap();
        let native = run_native(&graph, &models, &mut providers, &mut io::sink()).unwrap();

        fixed.reseed(seed).unwrap();
        let via_fixed = fixed.call(Codec::Fixed).unwrap();
        varint.reseed(seed).unwrap();
        let via_varint = varint.call(Codec::Varint).unwrap();

        assert_eq!(native.payload(), via_fixed.payload(), "seed {seed}: fixed differs");
        assert_eq!(native.payload(), via_varint.payload(), "seed {seed}: varint differs");
        assert_eq!(native.dims(), via_fixed.dims());
        assert_eq!(native.dims(), via_varint.dims());
    }
}
