use alloc::vec::Vec;

/// Bilinear resampling of a row-major `width × height` grayscale image using
/// pixel-center alignment, with edge clamping.
pub fn resize_bilinear(src: &[f64], width: usize, height: usize, new_width: usize, new_height: usize) -> Vec<f64> {
    assert_eq!(src.len(), width * height, "image buffer does not match its size");
    if width == new_width && height == new_height {
        return src.to_vec();
    }
    let sample = |x_out: usize, scale: f64, limit: usize| -> (usize, usize, f64) {
        let pos = ((x_out as f64 + 0.5) * scale - 0.5).clamp(0.0, (limit - 1) as f64);
        let lo = libm::floor(pos) as usize;
        let hi = (lo + 1).min(limit - 1);
        (lo, hi, pos - lo as f64)
    };
    let sx = width as f64 / new_width as f64;
    let sy = height as f64 / new_height as f64;
    let mut out = Vec::with_capacity(new_width * new_height);
    for y in 0..new_height {
        let (y0, y1, fy) = sample(y, sy, height);
        for x in 0..new_width {
            let (x0, x1, fx) = sample(x, sx, width);
            let top = src[y0 * width + x0] * (1.0 - fx) + src[y0 * width + x1] * fx;
            let bottom = src[y1 * width + x0] * (1.0 - fx) + src[y1 * width + x1] * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}
