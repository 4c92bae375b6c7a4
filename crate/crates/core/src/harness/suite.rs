/// A suite program and its desk-scale size parameter.
#[derive(Clone, Copy, Debug)]
pub struct Benchmark {
    pub name: &'static str,
    pub source: &'static str,
    pub default_size: i64,
    /// Cost grows exponentially or factorially in the size.
    pub steep: bool,
}

pub const BENCHMARKS: [Benchmark; 6] = [
    Benchmark {
        name: "binarytrees",
        source: include_str!("../../suite/binarytrees.gl"),
        default_size: 8,
        steep: true,
    },
    Benchmark {
        name: "fannkuch",
        source: include_str!("../../suite/fannkuch.gl"),
        default_size: 7,
        steep: true,
    },
    Benchmark {
        name: "fasta",
        source: include_str!("../../suite/fasta.gl"),
        default_size: 1000,
        steep: false,
    },
    Benchmark {
        name: "mandelbrot",
        source: include_str!("../../suite/mandelbrot.gl"),
        default_size: 64,
        steep: false,
    },
    Benchmark {
        name: "nbody",
        source: include_str!("../../suite/nbody.gl"),
        default_size: 1000,
        steep: false,
    },
    Benchmark {
        name: "spectralnorm",
        source: include_str!("../../suite/spectralnorm.gl"),
        default_size: 100,
        steep: false,
    },
];

pub fn suite_programs() -> &'static [Benchmark] {
    &BENCHMARKS
}

pub(super) fn find(name: &str) -> Option<&'static Benchmark> {
    BENCHMARKS.iter().find(|b| b.name == name)
}

/// Size for a given work scale. Linear benchmarks scale the size directly;
/// steep ones add log2 of the scale.
pub fn scaled_size(b: &Benchmark, scale: f64) -> i64 {
    if scale == 1.0 {
        return b.default_size;
    }
    if b.steep {
        (b.default_size + scale.log2().round() as i64).max(1)
    } else {
        ((b.default_size as f64 * scale).round() as i64).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling() {
        let nbody = find("nbody").unwrap();
        assert_eq!(scaled_size(nbody, 1.0), 1000);
        assert_eq!(scaled_size(nbody, 0.1), 100);
        let trees = find("binarytrees").unwrap();
        assert_eq!(scaled_size(trees, 4.0), 10);
        assert_eq!(scaled_size(trees, 0.25), 6);
    }
}
