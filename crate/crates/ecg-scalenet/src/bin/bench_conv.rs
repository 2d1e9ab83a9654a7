use ecg_scalenet::ops::{conv1d_forward, conv1d_backward, ConvParams};
use ecg_scalenet::Tensor;
use rand::SeedableRng;
use std::time::Instant;

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    // representative late-block shape: batch 8, 256->256 channels, len 16, K=3
    for (b, ci, co, l, k, s) in [(8usize, 256usize, 256usize, 16usize, 3usize, 1usize),
                                  (8, 128, 128, 32, 3, 1),
                                  (8, 12, 128, 125, 3, 2),
                                  (8, 1024, 1024, 4, 3, 1)] {
        let x = Tensor::randn(&[b, ci, l], 1.0, &mut rng);
        let w = Tensor::randn(&[k, ci, co], 0.1, &mut rng);
        let p = ConvParams::new(k, s, k/2, ci, co, w).unwrap();
        let out_len = (l + 2*(k/2) - k)/s + 1;
        let mac = (b * co * out_len * k * ci) as f64;
        // warmup
        let y = conv1d_forward(&x, &p).unwrap();
        let iters = (2e9 / mac).max(3.0) as usize;
        let t0 = Instant::now();
        for _ in 0..iters { std::hint::black_box(conv1d_forward(&x, &p).unwrap()); }
        let dt = t0.elapsed().as_secs_f64();
        let fwd_rate = mac * iters as f64 / dt / 1e9;
        let t0 = Instant::now();
        for _ in 0..iters { std::hint::black_box(conv1d_backward(&y, &x, &p).unwrap()); }
        let dt = t0.elapsed().as_secs_f64();
        let bwd_rate = 2.0 * mac * iters as f64 / dt / 1e9;
        println!("b{b} {ci}->{co} L{l} K{k} s{s}: fwd {fwd_rate:.2} GMAC/s, bwd {bwd_rate:.2} GMAC/s");
    }
}
