//! Deterministic synthetic scenes with exact ground-truth masks.
//!
//! Scenes have a smoothly shaded, mildly noisy background with a few
//! low-contrast distractor blobs, and one to three foreground objects
//! (ellipses or rounded rectangles) in a color that stands out.

use image::{GrayImage, Luma, Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One generated image with its mask.
#[derive(Debug, Clone)]
pub struct Scene {
    pub name: String,
    pub image: RgbImage,
    pub mask: GrayImage,
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64, angle: f64 },
    Rect { cx: f64, cy: f64, hw: f64, hh: f64, corner: f64 },
}

impl Shape {
    fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Shape::Ellipse { cx, cy, rx, ry, angle } => {
                let (s, c) = angle.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
            }
            Shape::Rect { cx, cy, hw, hh, corner } => {
                let qx = ((x - cx).abs() - (hw - corner)).max(0.0);
                let qy = ((y - cy).abs() - (hh - corner)).max(0.0);
                qx * qx + qy * qy <= corner * corner
            }
        }
    }
}

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()]
}

fn color_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

fn random_shape(rng: &mut ChaCha8Rng, w: f64, h: f64, scale: f64) -> Shape {
    let size = w.min(h) * scale;
    let cx = rng.random_range(0.25 * w..0.75 * w);
    let cy = rng.random_range(0.25 * h..0.75 * h);
    if rng.random_bool(0.6) {
        Shape::Ellipse {
            cx,
            cy,
            rx: size * rng.random_range(0.7..1.3),
            ry: size * rng.random_range(0.7..1.3),
            angle: rng.random_range(0.0..std::f64::consts::PI),
        }
    } else {
        let (hw, hh) = (size * rng.random_range(0.6..1.2), size * rng.random_range(0.6..1.2));
        Shape::Rect {
            cx,
            cy,
            hw,
            hh,
            corner: hw.min(hh) * 0.3,
        }
    }
}

/// Generate one scene from `seed`.
pub fn scene(seed: u64, width: u32, height: u32) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (width as f64, height as f64);

    let bg_a = random_color(&mut rng);
    let mut bg_b = bg_a;
    for c in &mut bg_b {
        *c = (*c + rng.random_range(-0.15..0.15)).clamp(0.0, 1.0);
    }
    let mut fg = random_color(&mut rng);
    while color_distance(fg, bg_a) < 0.6 || color_distance(fg, bg_b) < 0.6 {
        fg = random_color(&mut rng);
    }
    let gradient_angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (gs, gc) = gradient_angle.sin_cos();

    let distractors: Vec<(Shape, [f64; 3])> = (0..rng.random_range(1..=3))
        .map(|_| {
            let mut shape = random_shape(&mut rng, w, h, 0.12);
            // Push distractors toward the border.
            match &mut shape {
                Shape::Ellipse { cx, cy, .. } | Shape::Rect { cx, cy, .. } => {
                    *cx = if *cx < w / 2.0 { *cx * 0.4 } else { w - (w - *cx) * 0.4 };
                    *cy = if *cy < h / 2.0 { *cy * 0.4 } else { h - (h - *cy) * 0.4 };
                }
            }
            let tint = bg_a.map(|c| (c + rng.random_range(-0.2..0.2)).clamp(0.0, 1.0));
            (shape, tint)
        })
        .collect();

    let object_count = rng.random_range(1..=3);
    let scale = match object_count {
        1 => 0.22,
        2 => 0.15,
        _ => 0.11,
    };
    let objects: Vec<Shape> = (0..object_count)
        .map(|_| random_shape(&mut rng, w, h, scale))
        .collect();
    let stripe_period = rng.random_range(6.0..14.0);

    let mut image = RgbImage::new(width, height);
    let mut mask = GrayImage::new(width, height);
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let t = ((px / w - 0.5) * gc + (py / h - 0.5) * gs + 0.5).clamp(0.0, 1.0);
            let mut color: [f64; 3] = std::array::from_fn(|i| bg_a[i] * (1.0 - t) + bg_b[i] * t);
            for (shape, tint) in &distractors {
                if shape.contains(px, py) {
                    color = *tint;
                }
            }
            let inside = objects.iter().any(|s| s.contains(px, py));
            if inside {
                let stripe = 0.06 * (2.0 * std::f64::consts::PI * (px + py) / stripe_period).sin();
                color = fg.map(|c| c + stripe);
                mask.put_pixel(x, y, Luma([255]));
            }
            let noise = 0.03;
            let px_color: [u8; 3] = std::array::from_fn(|i| {
                let v = color[i] + rng.random_range(-noise..noise);
                (v.clamp(0.0, 1.0) * 255.0).round() as u8
            });
            image.put_pixel(x, y, Rgb(px_color));
        }
    }

    Scene {
        name: format!("scene_{seed:03}"),
        image,
        mask,
    }
}

/// `count` scenes with seeds `first_seed..first_seed + count`.
pub fn mini_dataset(count: usize, first_seed: u64, width: u32, height: u32) -> Vec<Scene> {
    (0..count as u64)
        .map(|i| scene(first_seed + i, width, height))
        .collect()
}
