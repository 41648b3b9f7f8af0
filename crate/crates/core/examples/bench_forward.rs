use hardnet_core::graph::{analyze, compare_blocks, BlockSpec, NetSpec};
use hardnet_core::net::{forward, init_weights};
use hardnet_core::Tensor;
use std::time::Instant;

fn main() {
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().unwrap();
    let net = NetSpec::load(std::path::Path::new("configs/hardnetv2-53.json")).unwrap();
    let report = analyze(&net, (1, 3, 512, 512)).unwrap();
    println!(
        "53-config @512: {:.3} GMACs, CIO {:.1} M, MoC {:.1}, params {:.2} M",
        report.totals.macs as f64 / 1e9,
        report.totals.cio as f64 / 1e6,
        report.totals.moc,
        report.totals.params as f64 / 1e6
    );
    let store = init_weights(&net, 0).unwrap();
    let img = Tensor::from_fn(vec![1, 3, 512, 512], |i| ((i % 255) as f32) / 255.0);
    let t = Instant::now();
    let out = forward(&net, &store, &img).unwrap();
    println!("forward 512 single-thread: {:.2} s, main[0]={}", t.elapsed().as_secs_f64(), out.main.data()[0]);

    // Data-movement comparison sweep: v1 n=8 vs v2 n=9 at several (C, g1).
    for c in [64usize, 128, 192, 256] {
        for g1 in [4usize, 6, 8, 10, 12, 14, 16] {
            let a = BlockSpec::v1(8, g1, 1.7);
            let mut best: Option<(usize, f64, u64, u64)> = None;
            for g2 in 2..120 {
                let b = BlockSpec::v2(9, g2);
                let cmp = compare_blocks(&a, &b, (1, c, 56, 56)).unwrap();
                let gap = cmp.macs_gap();
                if best.is_none() || gap < best.unwrap().1 {
                    best = Some((g2, gap, cmp.cio_a, cmp.cio_b));
                }
            }
            let (g2, gap, cio_a, cio_b) = best.unwrap();
            println!(
                "C={c:3} g1={g1:2} -> g2={g2:3} gap={:.2}% cio_v1={cio_a} cio_v2={cio_b}  v2_lower={}",
                gap * 100.0,
                cio_b < cio_a
            );
        }
    }
}
