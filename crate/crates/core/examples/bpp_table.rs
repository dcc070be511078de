//! Bits per pixel of the standard architectures at single and half
//! precision, for a given image size.
//!
//! ```text
//! cargo run --example bpp_table -- [HEIGHT] [WIDTH]
//! ```

use sparse_inr::bpp::{arch_bpp, HALF_BITS, SINGLE_BITS};
use sparse_inr::trainer::STANDARD_TARGETS;
use sparse_inr::SirenConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let height: usize = args.next().map_or(512, |s| s.parse().expect("height"));
    let width: usize = args.next().map_or(768, |s| s.parse().expect("width"));
    let pixels = height * width;
    println!("{height}x{width} image");
    println!("arch           params  bpp@f32  bpp@f16");
    for (l, w) in [(5, 20), (5, 30), (10, 28), (10, 40), (13, 40)] {
        let arch = SirenConfig::image(l, w);
        println!(
            "{:<13} {:>7}  {:>7.4}  {:>7.4}",
            arch.to_string(),
            arch.param_count(),
            arch_bpp(&arch, SINGLE_BITS, pixels),
            arch_bpp(&arch, HALF_BITS, pixels)
        );
    }
    println!("\ntarget  dense arch  sparsified from  dual lr");
    for t in &STANDARD_TARGETS {
        println!(
            "{:<6}  {:<10}  {:<15}  {:e}",
            t.target_bpp,
            format!("{}x{}", t.dense_arch.0, t.dense_arch.1),
            format!("{}x{}", t.initial_arch.0, t.initial_arch.1),
            t.dual_lr
        );
    }
}
