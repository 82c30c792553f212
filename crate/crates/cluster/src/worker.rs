//! The worker side: holds a KB, expands and evaluates blocks on request.

use std::collections::HashMap;
use std::io::{self, BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use dlpar_core::concept::hash_concept;
use dlpar_core::eval::{evaluate_batch, is_weak, CoverageResult, Score};
use dlpar_core::kb::{deserialize_kb, KbError};
use dlpar_core::refine::RefinementConfig;
use dlpar_core::search::{
    compare_final, expand_nodes, reduce_redundant, ClosedList, SearchContext, SearchNode,
};
use dlpar_core::{Bitset, Concept, Dataset, ExampleSet};

use crate::block::BlockNode;
use crate::message::{ExpandResult, KbTransfer, Message, MessageError, WorkerParams};
use crate::wire::{read_frame, write_frame, FrameError};
use crate::ClusterError;

/// Length bound used when probing a worker's speed.
pub const PROBE_LENGTH: usize = 5;

#[derive(Debug, Clone)]
pub struct WorkerConfig {
    /// UDP address to answer discovery on; `None` disables discovery.
    pub discovery_addr: Option<SocketAddr>,
    pub listen_addr: SocketAddr,
    /// Reported core count and local thread count; defaults to the machine's.
    pub cores: Option<usize>,
    pub io_timeout: Option<Duration>,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        WorkerConfig {
            discovery_addr: Some(SocketAddr::from(([0, 0, 0, 0], crate::discovery::DEFAULT_BROADCAST_PORT))),
            listen_addr: SocketAddr::from(([0, 0, 0, 0], crate::discovery::DEFAULT_DATA_PORT)),
            cores: None,
            io_timeout: None,
        }
    }
}

/// A KB loaded from a master together with the search parameters.
pub struct WorkerSession {
    pub dataset: Dataset,
    pub params: WorkerParams,
    refinement: RefinementConfig,
    best: Vec<SearchNode>,
}

impl WorkerSession {
    pub fn from_transfer(t: &KbTransfer) -> Result<Self, KbError> {
        let (symbols, kb) = deserialize_kb(&t.image)?;
        let n = kb.num_individuals();
        let ids = |v: &[u32]| -> Result<Bitset, KbError> {
            let mut b = Bitset::new(n);
            for &i in v {
                if i as usize >= n {
                    return Err(KbError::UnknownIndividual {
                        line: 0,
                        name: format!("#{i}"),
                    });
                }
                b.insert(i as usize);
            }
            Ok(b)
        };
        let examples = ExampleSet::new(ids(&t.positives)?, ids(&t.negatives)?);
        let dataset = Dataset::new(symbols, kb, examples)?;
        let p = t.params;
        let refinement = RefinementConfig {
            max_cardinality: dataset.stats.max_fillers.clone(),
            use_inverse_roles: p.use_inverse_roles,
            use_cardinality: p.use_cardinality,
            use_disjunction: p.use_disjunction,
            use_negation: p.use_negation,
            max_length: (p.max_length as usize).max(1),
        };
        Ok(WorkerSession {
            dataset,
            params: p,
            refinement,
            best: Vec::new(),
        })
    }

    fn context(&self) -> SearchContext<'_> {
        let ds = &self.dataset;
        SearchContext::new(
            &ds.kb,
            &ds.examples,
            &ds.stats,
            &ds.mb,
            &self.refinement,
            self.params.score,
            self.params.noise,
        )
    }

    /// Expands ⊤ to the probe length and evaluates the refinements; returns
    /// the elapsed wall time.
    pub fn probe(&self, threads: usize) -> Duration {
        let started = Instant::now();
        let ctx = self.context();
        let bound = PROBE_LENGTH.min(self.refinement.max_length.max(1));
        let concepts = ctx.refiner.refine(&Concept::Top, bound);
        let ds = &self.dataset;
        evaluate_batch(&concepts, &ds.kb, &ds.examples, threads);
        started.elapsed()
    }

    /// One learning step on `block`: expand every node, deduplicate locally,
    /// evaluate, split off weak refinements.
    pub fn expand_block(&mut self, block: &[BlockNode], threads: usize) -> ExpandResult {
        let ctx = self.context();
        let ds = &self.dataset;
        let mut nodes: Vec<SearchNode> = block.iter().map(|b| block_to_node(b, &ds.examples, &ctx)).collect();
        let index: HashMap<u64, u32> = nodes.iter().enumerate().map(|(i, n)| (n.hash.0, i as u32)).collect();
        let lists = expand_nodes(&mut nodes, &ctx, threads);
        let generated: usize = lists.iter().map(|e| e.refinements.len()).sum();
        let fresh = reduce_redundant(lists, &ClosedList::default(), threads);
        let concepts: Vec<Concept> = fresh.iter().map(|r| r.concept.clone()).collect();
        let coverage = evaluate_batch(&concepts, &ds.kb, &ds.examples, threads);

        let mut out = ExpandResult {
            nodes: Vec::new(),
            parents: Vec::new(),
            weak: Vec::new(),
            generated: generated as u32,
        };
        let mut kept = Vec::new();
        for (r, cov) in fresh.into_iter().zip(coverage) {
            if is_weak(&cov, &ds.examples, ctx.noise) {
                out.weak.push(r.hash.0);
                continue;
            }
            let node = SearchNode::new(r.concept, r.hash, cov, Some((r.parent, r.parent_accuracy)), &ctx);
            out.nodes.push(node_to_block(&node));
            out.parents.push(index[&r.parent.0]);
            kept.push(node);
        }
        drop(ctx);
        self.remember(kept);
        out
    }

    fn remember(&mut self, nodes: Vec<SearchNode>) {
        let limit = (self.params.limit as usize).max(1);
        self.best.extend(nodes);
        self.best.sort_by(compare_final);
        self.best.truncate(limit);
    }

    /// The best hypotheses this worker has produced so far.
    pub fn best(&self) -> Vec<BlockNode> {
        self.best.iter().map(node_to_block).collect()
    }
}

pub fn node_to_block(n: &SearchNode) -> BlockNode {
    BlockNode {
        concept: n.concept.clone(),
        he: n.he.min(u16::MAX as usize) as u16,
        pos_covered: n.coverage.pos_covered,
        neg_covered: n.coverage.neg_covered,
        score: n.score.value,
    }
}

/// Rebuilds a node from its wire form. Parent links are not transmitted.
pub fn block_to_node(b: &BlockNode, examples: &ExampleSet, ctx: &SearchContext) -> SearchNode {
    let coverage = CoverageResult::new(b.pos_covered, b.neg_covered);
    let he = b.he as usize;
    SearchNode {
        hash: hash_concept(&b.concept),
        concept: b.concept.clone(),
        he,
        score: Score {
            accuracy: coverage.accuracy(examples),
            value: b.score,
        },
        coverage,
        parent: None,
        parent_accuracy: None,
        expandable: he < ctx.refinement.max_length,
    }
}

/// Why a session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionEnd {
    Terminated,
    Disconnected,
}

/// Serves one master connection until TERMINATE or disconnect.
pub fn serve_connection(stream: TcpStream, cores: usize, io_timeout: Option<Duration>) -> Result<SessionEnd, ClusterError> {
    stream.set_read_timeout(io_timeout)?;
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut session: Option<WorkerSession> = None;
    let threads = cores.max(1);

    let reply = |w: &mut BufWriter<TcpStream>, m: Message| write_frame(w, &m.to_frame(threads));
    loop {
        let frame = match read_frame(&mut reader) {
            Ok(f) => f,
            Err(FrameError::Io(e)) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(SessionEnd::Disconnected),
            Err(FrameError::Io(e)) => return Err(e.into()),
            Err(e) => {
                let _ = reply(&mut writer, Message::Error { message: e.to_string() });
                return Err(MessageError::from(e).into());
            }
        };
        let msg = match Message::from_frame(&frame, threads) {
            Ok(m) => m,
            Err(e) => {
                let _ = reply(&mut writer, Message::Error { message: e.to_string() });
                return Err(e.into());
            }
        };
        let answer = match (msg, session.as_mut()) {
            (Message::Hello { .. }, _) => Message::HelloAck { cores: threads as u32 },
            (Message::KbTransfer(t), _) => match WorkerSession::from_transfer(&t) {
                Ok(s) => {
                    let individuals = s.dataset.kb.num_individuals() as u32;
                    session = Some(s);
                    Message::KbAck { individuals }
                }
                Err(e) => {
                    let _ = reply(&mut writer, Message::Error { message: e.to_string() });
                    return Err(ClusterError::Protocol(format!("bad KB transfer: {e}")));
                }
            },
            (Message::Probe, Some(s)) => Message::ProbeResult {
                cores: threads as u32,
                elapsed_millis: s.probe(threads).as_millis().min(u32::MAX as u128) as u32,
            },
            (Message::ExpandTask { nodes }, Some(s)) => Message::ExpandResult(s.expand_block(&nodes, threads)),
            (Message::Terminate, s) => {
                let nodes = s.map(|s| s.best()).unwrap_or_default();
                reply(&mut writer, Message::BestHypotheses { nodes })?;
                return Ok(SessionEnd::Terminated);
            }
            (other, _) => {
                let message = format!("unexpected {:?} in this state", other.kind());
                let _ = reply(&mut writer, Message::Error { message: message.clone() });
                return Err(ClusterError::Protocol(message));
            }
        };
        reply(&mut writer, answer)?;
    }
}

/// A bound worker: TCP listener plus optional discovery socket.
pub struct Worker {
    listener: TcpListener,
    udp: Option<UdpSocket>,
    cores: usize,
    io_timeout: Option<Duration>,
    stop: Arc<AtomicBool>,
}

impl Worker {
    pub fn bind(cfg: &WorkerConfig) -> io::Result<Self> {
        let listener = TcpListener::bind(cfg.listen_addr)?;
        let udp = cfg.discovery_addr.map(UdpSocket::bind).transpose()?;
        let cores = cfg
            .cores
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        Ok(Worker {
            listener,
            udp,
            cores: cores.max(1),
            io_timeout: cfg.io_timeout,
            stop: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn tcp_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn discovery_addr(&self) -> Option<SocketAddr> {
        self.udp.as_ref().and_then(|u| u.local_addr().ok())
    }

    pub fn cores(&self) -> usize {
        self.cores
    }

    /// Serves masters one at a time. Returns after `sessions` sessions, or
    /// never when `None`. Session errors are reported through `on_error`
    /// and do not stop the worker.
    pub fn serve(self, sessions: Option<usize>, mut on_error: impl FnMut(&ClusterError)) -> io::Result<()> {
        let port = self.listener.local_addr()?.port();
        let responder = self.udp.map(|udp| {
            let stop = self.stop.clone();
            std::thread::spawn(move || crate::discovery::respond(&udp, port, &stop))
        });
        let mut served = 0;
        let result = loop {
            if sessions.is_some_and(|s| served >= s) {
                break Ok(());
            }
            let stream = match self.listener.accept() {
                Ok((s, _)) => s,
                Err(e) => break Err(e),
            };
            if let Err(e) = serve_connection(stream, self.cores, self.io_timeout) {
                on_error(&e);
            }
            served += 1;
        };
        self.stop.store(true, Ordering::Relaxed);
        if let Some(r) = responder {
            r.join().expect("discovery responder panicked")?;
        }
        result
    }
}
