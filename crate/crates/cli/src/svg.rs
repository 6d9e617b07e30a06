//! Static SVG heatmap for the dual-frequency sweep.
//!
//! One `rect` per (F1, F2) cell, F1 on the x axis and F2 on the y axis, both
//! ascending from the origin. Colors interpolate a fixed two-stop ramp from
//! the minimum to the maximum value, with the range annotated on a legend
//! bar. Everything is emitted with integer pixel coordinates so the output
//! is byte-stable.

use crate::report::sig6;

const CELL: usize = 30;
const MARGIN_LEFT: usize = 80;
const MARGIN_TOP: usize = 50;
const MARGIN_BOTTOM: usize = 60;
const MARGIN_RIGHT: usize = 150;
const LEGEND_STEPS: usize = 32;

const COLOR_LO: (u8, u8, u8) = (68, 1, 84);
const COLOR_HI: (u8, u8, u8) = (253, 231, 37);

fn lerp_color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let ch = |a: u8, b: u8| (a as f64 + t * (b as f64 - a as f64)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        ch(COLOR_LO.0, COLOR_HI.0),
        ch(COLOR_LO.1, COLOR_HI.1),
        ch(COLOR_LO.2, COLOR_HI.2)
    )
}

fn fmt_freq(f: f64) -> String {
    if (f - f.round()).abs() < 1e-9 {
        format!("{}", f.round() as i64)
    } else {
        sig6(f)
    }
}

/// Renders a square heatmap from row-major `(f1_mhz, f2_mhz, value)` cells.
///
/// `levels` must be the ascending frequency ladder shared by both axes;
/// every cell coordinate has to be one of its entries.
pub fn heatmap(levels: &[f64], cells: &[(f64, f64, f64)], title: &str) -> String {
    let n = levels.len();
    let grid = n * CELL;
    let width = MARGIN_LEFT + grid + MARGIN_RIGHT;
    let height = MARGIN_TOP + grid + MARGIN_BOTTOM;

    let idx = |f: f64| -> usize {
        levels
            .iter()
            .position(|&l| (l - f).abs() < 1e-6)
            .expect("cell frequency not on the ladder")
    };

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(_, _, v) in cells {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let t_of = |v: f64| if span > 0.0 { (v - lo) / span } else { 0.5 };

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\">\n"
    ));
    s.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
    ));
    s.push_str(&format!(
        "  <text x=\"{}\" y=\"28\" font-size=\"15\" text-anchor=\"middle\">{title}</text>\n",
        MARGIN_LEFT + grid / 2
    ));

    for &(f1, f2, v) in cells {
        let x = MARGIN_LEFT + idx(f1) * CELL;
        let y = MARGIN_TOP + (n - 1 - idx(f2)) * CELL;
        s.push_str(&format!(
            "  <rect class=\"cell\" x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" \
             fill=\"{}\"><title>F1={} F2={} value={}</title></rect>\n",
            lerp_color(t_of(v)),
            fmt_freq(f1),
            fmt_freq(f2),
            sig6(v)
        ));
    }

    for (i, &f) in levels.iter().enumerate() {
        let cx = MARGIN_LEFT + i * CELL + CELL / 2;
        let cy = MARGIN_TOP + (n - 1 - i) * CELL + CELL / 2 + 4;
        s.push_str(&format!(
            "  <text x=\"{cx}\" y=\"{}\" font-size=\"9\" text-anchor=\"middle\" \
             transform=\"rotate(45 {cx} {0})\">{}</text>\n",
            MARGIN_TOP + grid + 14,
            fmt_freq(f)
        ));
        s.push_str(&format!(
            "  <text x=\"{}\" y=\"{cy}\" font-size=\"9\" text-anchor=\"end\">{}</text>\n",
            MARGIN_LEFT - 6,
            fmt_freq(f)
        ));
    }
    s.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">F1 (MHz)</text>\n",
        MARGIN_LEFT + grid / 2,
        MARGIN_TOP + grid + 46
    ));
    s.push_str(&format!(
        "  <text x=\"18\" y=\"{0}\" font-size=\"12\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {0})\">F2 (MHz)</text>\n",
        MARGIN_TOP + grid / 2
    ));

    let legend_x = MARGIN_LEFT + grid + 30;
    let step_h = grid.div_euclid(LEGEND_STEPS).max(1);
    for i in 0..LEGEND_STEPS {
        let t = if LEGEND_STEPS > 1 {
            i as f64 / (LEGEND_STEPS - 1) as f64
        } else {
            0.5
        };
        let y = MARGIN_TOP + grid - (i + 1) * step_h;
        s.push_str(&format!(
            "  <rect x=\"{legend_x}\" y=\"{y}\" width=\"16\" height=\"{step_h}\" fill=\"{}\"/>\n",
            lerp_color(t)
        ));
    }
    s.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n",
        legend_x + 22,
        MARGIN_TOP + grid - LEGEND_STEPS * step_h + 8,
        sig6(hi)
    ));
    s.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"10\">{}</text>\n",
        legend_x + 22,
        MARGIN_TOP + grid,
        sig6(lo)
    ));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder() -> Vec<f64> {
        (0..13).map(|i| 900.0 + 100.0 * i as f64).collect()
    }

    fn grid_cells(levels: &[f64]) -> Vec<(f64, f64, f64)> {
        let mut cells = Vec::new();
        for &f1 in levels {
            for &f2 in levels {
                cells.push((f1, f2, f1 + 2.0 * f2));
            }
        }
        cells
    }

    #[test]
    fn one_rect_per_cell() {
        let levels = ladder();
        let svg = heatmap(&levels, &grid_cells(&levels), "test");
        assert_eq!(svg.matches("class=\"cell\"").count(), 169);
    }

    #[test]
    fn output_is_deterministic() {
        let levels = ladder();
        let a = heatmap(&levels, &grid_cells(&levels), "test");
        let b = heatmap(&levels, &grid_cells(&levels), "test");
        assert_eq!(a, b);
    }

    #[test]
    fn extremes_get_the_ramp_endpoints() {
        let levels = vec![900.0, 1000.0];
        let cells = vec![
            (900.0, 900.0, 1.0),
            (900.0, 1000.0, 2.0),
            (1000.0, 900.0, 3.0),
            (1000.0, 1000.0, 4.0),
        ];
        let svg = heatmap(&levels, &cells, "t");
        assert!(svg.contains("#440154"));
        assert!(svg.contains("#fde725"));
        assert!(svg.contains("F1=900 F2=900 value=1.00000"));
    }

    #[test]
    fn constant_values_render_without_nan() {
        let levels = vec![900.0, 1000.0];
        let cells = vec![
            (900.0, 900.0, 1.0),
            (900.0, 1000.0, 1.0),
            (1000.0, 900.0, 1.0),
            (1000.0, 1000.0, 1.0),
        ];
        let svg = heatmap(&levels, &cells, "t");
        assert!(!svg.contains("NaN"));
    }
}
