#![no_main]

use ideophone::RasterImage;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = RasterImage::decode(data);
});
