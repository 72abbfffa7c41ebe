//! Synchronous peer-to-peer message rounds over a fixed communication graph.

use crate::error::{Error, Result};
use crate::geometry::NoisyTransform;
use crate::registration::{AlignmentResult, LandmarkMap};
use crate::tracking::InfoMessage;

/// Undirected communication graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommGraph {
    n: usize,
    adjacency: Vec<Vec<bool>>,
}

impl CommGraph {
    /// Validates symmetry, absence of self-loops, and connectivity.
    pub fn new(adjacency: Vec<Vec<bool>>) -> Result<Self> {
        let n = adjacency.len();
        if n == 0 {
            return Err(Error::config("communication graph has no robots"));
        }
        for (i, row) in adjacency.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config("communication graph adjacency is not square"));
            }
            if row[i] {
                return Err(Error::config(format!(
                    "communication graph has a self-loop at {i}"
                )));
            }
            for (j, &e) in row.iter().enumerate() {
                if e != adjacency[j][i] {
                    return Err(Error::config(format!(
                        "communication graph is not symmetric between {i} and {j}"
                    )));
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if adjacency[i][j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        if let Some(lost) = seen.iter().position(|s| !s) {
            return Err(Error::config(format!(
                "communication graph must be connected: robot {lost} is unreachable from robot 0"
            )));
        }
        Ok(Self { n, adjacency })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::config(format!(
                    "communication edge ({a}, {b}) names a robot outside 0..{n}"
                )));
            }
            adj[a][b] = true;
            adj[b][a] = true;
        }
        Self::new(adj)
    }

    pub fn complete(n: usize) -> Self {
        let adj = (0..n).map(|i| (0..n).map(|j| i != j).collect()).collect();
        Self::new(adj).expect("complete graphs are connected")
    }

    pub fn line(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("line graphs are connected")
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.adjacency[i][j]
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.adjacent(i, j)).collect()
    }
}

/// Free-function form of [`CommGraph::neighbors`].
pub fn neighbors(g: &CommGraph, i: usize) -> Vec<usize> {
    g.neighbors(i)
}

/// Who a message is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipient {
    Neighbors,
    Robot(usize),
}

/// Payloads exchanged between robots.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Info(InfoMessage),
    Map(LandmarkMap),
    /// Asks the recipient to realign against the sender's map and reply.
    AlignmentRequest {
        prev: NoisyTransform,
    },
    AlignmentResponse(AlignmentResult),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Info(_) => "info",
            Message::Map(_) => "map",
            Message::AlignmentRequest { .. } => "alignment_request",
            Message::AlignmentResponse(_) => "alignment_response",
        }
    }

    /// Rough wire size in bytes, for communication-volume reporting.
    pub fn size_estimate(&self) -> usize {
        match self {
            Message::Info(_) => 8 + 4 * 8 + 4 * 8 + 16 * 8 + 16,
            Message::Map(m) => 16 + m.entries.len() * 24,
            Message::AlignmentRequest { .. } => 12 * 8 + 8,
            Message::AlignmentResponse(_) => 12 * 8 + 8 + 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub to: Recipient,
    pub payload: Message,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delivered {
    pub sender: usize,
    pub seq: usize,
    pub payload: Message,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub sender: usize,
    pub recipient: usize,
    pub kind: &'static str,
    pub bytes: usize,
}

/// Messages delivered in one synchronous round, per recipient.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundMailbox {
    pub inboxes: Vec<Vec<Delivered>>,
}

impl RoundMailbox {
    pub fn inbox(&self, i: usize) -> &[Delivered] {
        &self.inboxes[i]
    }

    pub fn trace(&self) -> Vec<TraceRecord> {
        let mut out = Vec::new();
        for (recipient, inbox) in self.inboxes.iter().enumerate() {
            for d in inbox {
                out.push(TraceRecord {
                    sender: d.sender,
                    recipient,
                    kind: d.payload.kind(),
                    bytes: d.payload.size_estimate(),
                });
            }
        }
        out
    }
}

/// Delivers every outbox message to its addressed neighbors. Inboxes are
/// ordered by sender id, then by position in the sender's outbox.
pub fn exchange_round(outboxes: &[Vec<Envelope>], g: &CommGraph) -> Result<RoundMailbox> {
    if outboxes.len() != g.len() {
        return Err(Error::config(format!(
            "{} outboxes for a graph of {} robots",
            outboxes.len(),
            g.len()
        )));
    }
    let mut inboxes = vec![Vec::new(); g.len()];
    for (sender, outbox) in outboxes.iter().enumerate() {
        for (seq, env) in outbox.iter().enumerate() {
            match env.to {
                Recipient::Neighbors => {
                    for j in g.neighbors(sender) {
                        inboxes[j].push(Delivered {
                            sender,
                            seq,
                            payload: env.payload.clone(),
                        });
                    }
                }
                Recipient::Robot(j) => {
                    if !g.adjacent(sender, j) {
                        return Err(Error::NotNeighbor {
                            from: sender,
                            to: j,
                        });
                    }
                    inboxes[j].push(Delivered {
                        sender,
                        seq,
                        payload: env.payload.clone(),
                    });
                }
            }
        }
    }
    Ok(RoundMailbox { inboxes })
}

/// True on frames where `⌊frame · rate / frame_rate⌋` increments.
pub fn schedule_map_shares(frame: u64, rate_hz: f64, frame_rate_hz: f64) -> bool {
    if frame == 0 || rate_hz <= 0.0 || frame_rate_hz <= 0.0 {
        return false;
    }
    let ratio = rate_hz / frame_rate_hz;
    let now = (frame as f64 * ratio + 1e-9).floor();
    let before = ((frame - 1) as f64 * ratio + 1e-9).floor();
    now > before
}
