//! Line-delimited JSON scorer protocol.
//!
//! The peer first writes `{"vocab_size": n, "version": 1}`. Each request
//! is `{"id": k, "trace": [ids], "prefix": [ids]}` with full-vocabulary
//! ids; the reply is `{"id": k, "logits": [n reals, EOS last]}` or
//! `{"id": k, "error": "..."}`.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::process::{Child, Command, Stdio};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::vocab::{Domain, TokenId, TokenSeq, Vocabulary};

use super::Scorer;

pub const PROTOCOL_VERSION: u32 = 1;

/// Logits that JSON cannot carry are sent as this value.
const FLOOR: f64 = -1e300;

#[derive(Serialize, Deserialize)]
struct Handshake {
    vocab_size: usize,
    version: u32,
}

#[derive(Serialize, Deserialize)]
struct Request {
    id: u64,
    trace: Vec<TokenId>,
    prefix: Vec<TokenId>,
}

/// Scorer backed by a peer process or any pair of byte streams.
pub struct RemoteScorer {
    reader: Box<dyn BufRead + Send>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
    size: usize,
    next_id: u64,
}

impl std::fmt::Debug for RemoteScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteScorer").field("size", &self.size).field("next_id", &self.next_id).finish()
    }
}

impl RemoteScorer {
    /// Runs `command` through `sh -c` and talks to it over stdio.
    pub fn spawn(command: &str, vocab: &Vocabulary) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut s = RemoteScorer::from_streams(BufReader::new(stdout), stdin, vocab)?;
        s.child = Some(child);
        Ok(s)
    }

    pub fn from_streams<R, W>(reader: R, writer: W, vocab: &Vocabulary) -> Result<Self>
    where
        R: BufRead + Send + 'static,
        W: Write + Send + 'static,
    {
        let mut s = RemoteScorer {
            reader: Box::new(reader),
            writer: Box::new(writer),
            child: None,
            size: vocab.formula_size(),
            next_id: 0,
        };
        let line = s.read_line()?;
        let h: Handshake =
            serde_json::from_str(&line).map_err(|e| Error::Protocol(format!("bad handshake: {e}")))?;
        if h.version != PROTOCOL_VERSION {
            return Err(Error::Protocol(format!("unsupported protocol version {}", h.version)));
        }
        if h.vocab_size != s.size {
            return Err(Error::Protocol(format!(
                "peer vocabulary has {} formula tokens, expected {}",
                h.vocab_size, s.size
            )));
        }
        Ok(s)
    }

    fn read_line(&mut self) -> Result<String> {
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) => Err(Error::PeerClosed),
            Ok(_) => Ok(line),
            Err(e) if is_disconnect(e.kind()) => Err(Error::PeerClosed),
            Err(e) => Err(e.into()),
        }
    }
}

fn is_disconnect(kind: ErrorKind) -> bool {
    matches!(kind, ErrorKind::BrokenPipe | ErrorKind::ConnectionReset | ErrorKind::UnexpectedEof)
}

impl Drop for RemoteScorer {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Scorer for RemoteScorer {
    fn formula_vocab_size(&self) -> usize {
        self.size
    }

    fn next_logits(&mut self, trace: &TokenSeq, prefix: &TokenSeq) -> Result<Vec<f64>> {
        let id = self.next_id;
        self.next_id += 1;
        let req = Request { id, trace: trace.ids.clone(), prefix: prefix.ids.clone() };
        let mut buf = serde_json::to_vec(&req)?;
        buf.push(b'\n');
        let sent = self.writer.write_all(&buf).and_then(|_| self.writer.flush());
        match sent {
            Err(e) if is_disconnect(e.kind()) => return Err(Error::PeerClosed),
            r => r?,
        }
        let line = self.read_line()?;
        let v: Value = serde_json::from_str(&line).map_err(|e| Error::Protocol(format!("bad response: {e}")))?;
        if v.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(Error::Protocol(format!("response id does not match request {id}")));
        }
        if let Some(msg) = v.get("error") {
            return Err(Error::Protocol(format!("peer error: {msg}")));
        }
        let logits = v
            .get("logits")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Protocol("response has no logits".into()))?
            .iter()
            .map(|x| x.as_f64().ok_or_else(|| Error::Protocol("non-numeric logit".into())))
            .collect::<Result<Vec<f64>>>()?;
        if logits.len() != self.size {
            return Err(Error::VectorLengthMismatch { expected: self.size, got: logits.len() });
        }
        Ok(logits)
    }
}

/// Answers protocol requests with `scorer` until the input ends, or until
/// `limit` requests have been answered.
pub fn serve<S, R, W>(scorer: &mut S, vocab: &Vocabulary, reader: R, mut writer: W, limit: Option<usize>) -> Result<()>
where
    S: Scorer + ?Sized,
    R: BufRead,
    W: Write,
{
    let hs = Handshake { vocab_size: vocab.formula_size(), version: PROTOCOL_VERSION };
    serde_json::to_writer(&mut writer, &hs)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    let mut answered = 0;
    for line in reader.lines() {
        if limit.is_some_and(|l| answered >= l) {
            break;
        }
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Request>(&line) {
            Err(e) => {
                let id = serde_json::from_str::<Value>(&line).ok().and_then(|v| v.get("id").cloned());
                serde_json::json!({ "id": id, "error": e.to_string() })
            }
            Ok(req) => {
                let trace = TokenSeq { domain: Domain::Trace, ids: req.trace };
                let prefix = TokenSeq { domain: Domain::Formula, ids: req.prefix };
                match scorer.next_logits(&trace, &prefix) {
                    Ok(l) => {
                        let l: Vec<f64> = l.into_iter().map(|x| if x.is_finite() { x } else { FLOOR }).collect();
                        serde_json::json!({ "id": req.id, "logits": l })
                    }
                    Err(e) => serde_json::json!({ "id": req.id, "error": e.to_string() }),
                }
            }
        };
        serde_json::to_writer(&mut writer, &reply)?;
        writer.write_all(b"\n")?;
        writer.flush()?;
        answered += 1;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::io::{sink, Cursor};

    use super::*;
    use crate::decode::{beam_decode, DecodeConfig, NgramScorer, UniformScorer};
    use crate::dataset::DatasetPair;
    use crate::ltl::{parse_formula, Alphabet};
    use crate::trace::parse_trace;

    fn vocab() -> Vocabulary {
        Vocabulary::new(Alphabet::default())
    }

    fn scripted(lines: &str) -> Result<RemoteScorer> {
        RemoteScorer::from_streams(Cursor::new(lines.to_string().into_bytes()), sink(), &vocab())
    }

    fn empty() -> TokenSeq {
        TokenSeq::new(Domain::Formula)
    }

    #[test]
    fn handshake_checks() {
        assert!(matches!(scripted(""), Err(Error::PeerClosed)));
        assert!(matches!(scripted("{\"vocab_size\":12,\"version\":2}\n"), Err(Error::Protocol(_))));
        assert!(matches!(scripted("{\"vocab_size\":11,\"version\":1}\n"), Err(Error::Protocol(_))));
        assert!(matches!(scripted("hello\n"), Err(Error::Protocol(_))));
        assert!(scripted("{\"vocab_size\":12,\"version\":1}\n").is_ok());
    }

    #[test]
    fn response_errors() {
        let hs = "{\"vocab_size\":12,\"version\":1}\n";
        let mut s = scripted(&format!("{hs}{{\"id\":0,\"logits\":[0.0,1.0]}}\n")).unwrap();
        assert!(matches!(
            s.next_logits(&empty(), &empty()),
            Err(Error::VectorLengthMismatch { expected: 12, got: 2 })
        ));
        let mut s = scripted(&format!("{hs}{{\"id\":5,\"logits\":[]}}\n")).unwrap();
        assert!(matches!(s.next_logits(&empty(), &empty()), Err(Error::Protocol(_))));
        let mut s = scripted(&format!("{hs}not json\n")).unwrap();
        assert!(matches!(s.next_logits(&empty(), &empty()), Err(Error::Protocol(_))));
        let mut s = scripted(hs).unwrap();
        assert!(matches!(s.next_logits(&empty(), &empty()), Err(Error::PeerClosed)));
    }

    #[test]
    fn served_scorer_matches_local() {
        let v = vocab();
        let a = Alphabet::default();
        let pairs: Vec<DatasetPair> = [("{a}", "Xa"), ("a;{b}", "&aXb"), ("{&ab}", "U1b")]
            .iter()
            .map(|(t, f)| DatasetPair { trace: parse_trace(t, a).unwrap(), formula: parse_formula(f, a).unwrap() })
            .collect();
        let local = NgramScorer::train(&pairs, 3, &v).unwrap();
        let (req_r, req_w) = std::io::pipe().unwrap();
        let (resp_r, resp_w) = std::io::pipe().unwrap();
        let mut served = local.clone();
        let sv = v.clone();
        let peer = std::thread::spawn(move || serve(&mut served, &sv, BufReader::new(req_r), resp_w, None));
        let mut remote = RemoteScorer::from_streams(BufReader::new(resp_r), req_w, &v).unwrap();
        let cfg = DecodeConfig::default();
        for p in &pairs {
            let l = beam_decode(&mut local.clone(), &v, &p.trace, &cfg).unwrap();
            let r = beam_decode(&mut remote, &v, &p.trace, &cfg).unwrap();
            assert_eq!(l, r);
        }
        drop(remote);
        peer.join().unwrap().unwrap();
    }

    #[test]
    fn peer_stops_after_limit() {
        let v = vocab();
        let (req_r, req_w) = std::io::pipe().unwrap();
        let (resp_r, resp_w) = std::io::pipe().unwrap();
        let sv = v.clone();
        let peer = std::thread::spawn(move || {
            serve(&mut UniformScorer::new(&sv), &sv, BufReader::new(req_r), resp_w, Some(1))
        });
        let mut remote = RemoteScorer::from_streams(BufReader::new(resp_r), req_w, &v).unwrap();
        let t = parse_trace("a;{b}", v.alphabet()).unwrap();
        let r = beam_decode(&mut remote, &v, &t, &DecodeConfig::default());
        assert!(matches!(r, Err(Error::PeerClosed)), "{r:?}");
        peer.join().unwrap().unwrap();
    }
}
