use hardnet_core::ops::{conv2d, matmul};
use hardnet_core::Tensor;
use std::time::Instant;

fn main() {
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().unwrap();
    // conv: 32ch 128x128, 3x3, like a mid-stage layer
    let x = Tensor::from_fn(vec![1, 32, 128, 128], |i| (i as f32 * 0.001).sin());
    let w = Tensor::from_fn(vec![32, 32, 3, 3], |i| (i as f32 * 0.01).cos());
    let t = Instant::now();
    let mut n = 0;
    while t.elapsed().as_secs_f64() < 2.0 {
        let y = conv2d(&x, &w, None, 1, 1, 1).unwrap();
        std::hint::black_box(y);
        n += 1;
    }
    let macs = 9.0 * 32.0 * 32.0 * 128.0 * 128.0 * n as f64;
    println!("conv: {:.2} GMAC/s ({n} iters)", macs / t.elapsed().as_secs_f64() / 1e9);

    // matmul 4096x128 * 128x128  (decoder projection shape)
    let a = Tensor::from_fn(vec![4096, 128], |i| (i as f32 * 0.001).sin());
    let b = Tensor::from_fn(vec![128, 128], |i| (i as f32 * 0.01).cos());
    let t = Instant::now();
    let mut n = 0;
    while t.elapsed().as_secs_f64() < 2.0 {
        let y = matmul(&a, &b).unwrap();
        std::hint::black_box(y);
        n += 1;
    }
    let macs = 4096.0 * 128.0 * 128.0 * n as f64;
    println!("matmul: {:.2} GMAC/s ({n} iters)", macs / t.elapsed().as_secs_f64() / 1e9);
}
