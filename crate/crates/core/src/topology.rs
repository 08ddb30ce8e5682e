//! Mission geometry and channel sampling.
//!
//! Four fixed ground/air terminals (source, fusion center, primary
//! transmitter, primary receiver) plus `N` UAVs live on a flat rectangle.
//! Channels are Rayleigh: `h ~ CN(0, d^-2)` with path-loss exponent 2. The
//! direct source-fusion and primary transmitter-receiver links are too long to
//! be usable and are stored as exact zeros.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("a topology needs at least one UAV")]
    NoUavs,
    #[error("area dimensions must be positive and finite, got {width} x {height}")]
    InvalidArea { width: f64, height: f64 },
    #[error("explicit placement expects {expected} positions (4 fixed nodes + UAVs), got {got}")]
    PositionCount { expected: usize, got: usize },
    #[error("{node} at ({x}, {y}) lies outside the {width} x {height} area")]
    OutOfBounds {
        node: NodeId,
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
    #[error("{a} and {b} are co-located")]
    ZeroDistance { a: NodeId, b: NodeId },
}

/// Identity of a node in the mission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeId {
    Source,
    Fusion,
    PuTx,
    PuRx,
    Uav(usize),
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NodeId::Source => f.write_str("source"),
            NodeId::Fusion => f.write_str("fusion"),
            NodeId::PuTx => f.write_str("pu_tx"),
            NodeId::PuRx => f.write_str("pu_rx"),
            NodeId::Uav(i) => write!(f, "uav{i}"),
        }
    }
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Mission rectangle `[0, width] x [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub const fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    fn validate(&self) -> Result<(), TopologyError> {
        if self.width > 0.0
            && self.height > 0.0
            && self.width.is_finite()
            && self.height.is_finite()
        {
            Ok(())
        } else {
            Err(TopologyError::InvalidArea {
                width: self.width,
                height: self.height,
            })
        }
    }
}

impl Default for Area {
    fn default() -> Self {
        Self::new(100.0, 100.0)
    }
}

/// Positions of the four terminals that never move during a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedNodes {
    pub source: Point,
    pub fusion: Point,
    pub pu_tx: Point,
    pub pu_rx: Point,
}

impl Default for FixedNodes {
    /// Source/fusion pair along the top edge, primary pair along the bottom.
    fn default() -> Self {
        Self {
            source: Point::new(10.0, 90.0),
            fusion: Point::new(90.0, 90.0),
            pu_tx: Point::new(10.0, 10.0),
            pu_rx: Point::new(90.0, 10.0),
        }
    }
}

/// How UAV positions are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    /// Fixed terminals from [`FixedNodes`], UAVs uniform over the area.
    Random(FixedNodes),
    /// Every position given: `[source, fusion, pu_tx, pu_rx, uav_0, .., uav_{N-1}]`.
    Explicit(Vec<Point>),
}

/// Fixed mission geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    area: Area,
    fixed: FixedNodes,
    uavs: Vec<Point>,
}

impl Topology {
    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn area(&self) -> Area {
        self.area
    }

    pub fn fixed(&self) -> &FixedNodes {
        &self.fixed
    }

    pub fn uav_positions(&self) -> &[Point] {
        &self.uavs
    }

    /// Position of `node`, or `None` for a UAV index out of range.
    pub fn position(&self, node: NodeId) -> Option<Point> {
        match node {
            NodeId::Source => Some(self.fixed.source),
            NodeId::Fusion => Some(self.fixed.fusion),
            NodeId::PuTx => Some(self.fixed.pu_tx),
            NodeId::PuRx => Some(self.fixed.pu_rx),
            NodeId::Uav(i) => self.uavs.get(i).copied(),
        }
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> Option<f64> {
        Some(self.position(a)?.distance(&self.position(b)?))
    }

    /// All nodes, fixed terminals first.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        [NodeId::Source, NodeId::Fusion, NodeId::PuTx, NodeId::PuRx]
            .into_iter()
            .chain((0..self.uavs.len()).map(NodeId::Uav))
    }

    fn validate(&self) -> Result<(), TopologyError> {
        let placed: Vec<(NodeId, Point)> = self
            .nodes()
            .map(|n| (n, self.position(n).expect("node from own iterator")))
            .collect();
        for &(node, p) in &placed {
            if !self.area.contains(&p) {
                return Err(TopologyError::OutOfBounds {
                    node,
                    x: p.x,
                    y: p.y,
                    width: self.area.width,
                    height: self.area.height,
                });
            }
        }
        for (i, &(a, pa)) in placed.iter().enumerate() {
            for &(b, pb) in &placed[i + 1..] {
                if pa.distance(&pb) <= 0.0 {
                    return Err(TopologyError::ZeroDistance { a, b });
                }
            }
        }
        Ok(())
    }
}

/// Build and validate a topology. Random placement is a pure function of `rng_seed`.
pub fn build_topology(
    n_uavs: usize,
    area: Area,
    placement: &Placement,
    rng_seed: u64,
) -> Result<Topology, TopologyError> {
    if n_uavs == 0 {
        return Err(TopologyError::NoUavs);
    }
    area.validate()?;
    let topo = match placement {
        Placement::Random(fixed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let uavs = (0..n_uavs)
                .map(|_| {
                    Point::new(
                        rng.random_range(0.0..area.width),
                        rng.random_range(0.0..area.height),
                    )
                })
                .collect();
            Topology {
                area,
                fixed: *fixed,
                uavs,
            }
        }
        Placement::Explicit(points) => {
            if points.len() != n_uavs + 4 {
                return Err(TopologyError::PositionCount {
                    expected: n_uavs + 4,
                    got: points.len(),
                });
            }
            Topology {
                area,
                fixed: FixedNodes {
                    source: points[0],
                    fusion: points[1],
                    pu_tx: points[2],
                    pu_rx: points[3],
                },
                uavs: points[4..].to_vec(),
            }
        }
    };
    topo.validate()?;
    Ok(topo)
}

/// Whether channels stay fixed for a run or are redrawn every slot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    #[default]
    Static,
    PerSlot,
}

/// Gains of the four links touching one UAV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavLinks {
    pub source_to_uav: Complex64,
    pub uav_to_fusion: Complex64,
    pub pu_tx_to_uav: Complex64,
    pub uav_to_pu_rx: Complex64,
}

/// One draw of every in-scope channel coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    links: Vec<UavLinks>,
    source_to_fusion: Complex64,
    pu_tx_to_pu_rx: Complex64,
    draw_mode: DrawMode,
}

impl ChannelRealization {
    /// Realization from known gains; direct links are zero.
    pub fn from_links(links: Vec<UavLinks>, draw_mode: DrawMode) -> Self {
        Self {
            links,
            source_to_fusion: Complex64::new(0.0, 0.0),
            pu_tx_to_pu_rx: Complex64::new(0.0, 0.0),
            draw_mode,
        }
    }

    /// Realization from link power gains `|h|^2`, each stored as a real coefficient.
    /// Tuples are `(source->uav, uav->fusion, pu_tx->uav, uav->pu_rx)`.
    pub fn from_power_gains(gains: &[(f64, f64, f64, f64)]) -> Self {
        let c = |g: f64| Complex64::new(g.sqrt(), 0.0);
        let links = gains
            .iter()
            .map(|&(s, f, t, r)| UavLinks {
                source_to_uav: c(s),
                uav_to_fusion: c(f),
                pu_tx_to_uav: c(t),
                uav_to_pu_rx: c(r),
            })
            .collect();
        Self::from_links(links, DrawMode::Static)
    }

    pub fn n_uavs(&self) -> usize {
        self.links.len()
    }

    pub fn draw_mode(&self) -> DrawMode {
        self.draw_mode
    }

    pub fn links(&self) -> &[UavLinks] {
        &self.links
    }

    /// Coefficient of the directed link `from -> to`, `None` if the link is not modeled.
    pub fn gain(&self, from: NodeId, to: NodeId) -> Option<Complex64> {
        use NodeId::*;
        match (from, to) {
            (Source, Fusion) => Some(self.source_to_fusion),
            (PuTx, PuRx) => Some(self.pu_tx_to_pu_rx),
            (Source, Uav(j)) => self.links.get(j).map(|l| l.source_to_uav),
            (Uav(j), Fusion) => self.links.get(j).map(|l| l.uav_to_fusion),
            (PuTx, Uav(j)) => self.links.get(j).map(|l| l.pu_tx_to_uav),
            (Uav(j), PuRx) => self.links.get(j).map(|l| l.uav_to_pu_rx),
            _ => None,
        }
    }

    /// `|h|^2` of the directed link `from -> to`.
    pub fn power_gain(&self, from: NodeId, to: NodeId) -> Option<f64> {
        self.gain(from, to).map(|h| h.norm_sqr())
    }
}

/// One circularly-symmetric complex Gaussian draw with variance `distance^-2`.
pub fn draw_gain<R: Rng + ?Sized>(rng: &mut R, distance: f64) -> Complex64 {
    let sigma = (0.5 / (distance * distance)).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * sigma, im * sigma)
}

/// Draw all in-scope links for `topo`; a pure function of `(topo, rng_seed)`.
pub fn sample_channels(topo: &Topology, rng_seed: u64) -> ChannelRealization {
    sample_channels_with_mode(topo, rng_seed, DrawMode::Static)
}

pub fn sample_channels_with_mode(
    topo: &Topology,
    rng_seed: u64,
    draw_mode: DrawMode,
) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let f = topo.fixed();
    let links = topo
        .uav_positions()
        .iter()
        .map(|u| UavLinks {
            source_to_uav: draw_gain(&mut rng, f.source.distance(u)),
            uav_to_fusion: draw_gain(&mut rng, u.distance(&f.fusion)),
            pu_tx_to_uav: draw_gain(&mut rng, f.pu_tx.distance(u)),
            uav_to_pu_rx: draw_gain(&mut rng, u.distance(&f.pu_rx)),
        })
        .collect();
    ChannelRealization::from_links(links, draw_mode)
}
