//! External oracles speaking the JSON-lines protocol, and oracle selectors.
//!
//! Request `{"id":1,"history":[...],"horizon":24}`, reply
//! `{"id":1,"mean":[...]}` or `{"id":1,"error":"..."}`, one object per line.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use covadapt_core::oracle::{builtin_ar, builtin_seasonal_naive, DEFAULT_AR_PENALTY};
use covadapt_core::{Oracle, OracleForecast, OracleRequest};
use serde::{Deserialize, Serialize};

type CoreResult<T> = covadapt_core::Result<T>;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

fn oracle_err(message: impl Into<String>) -> covadapt_core::Error {
    covadapt_core::Error::Oracle(message.into())
}

#[derive(Debug, Serialize)]
pub struct WireRequest<'a> {
    pub id: u64,
    pub history: &'a [f64],
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireReply {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn encode_request(request: &OracleRequest) -> String {
    let wire = WireRequest { id: request.request_id, history: &request.context, horizon: request.horizon };
    serde_json::to_string(&wire).expect("request serializes")
}

/// Parses one reply line and checks it against the request.
pub fn decode_reply(request: &OracleRequest, line: &str) -> CoreResult<OracleForecast> {
    let reply: WireReply =
        serde_json::from_str(line.trim()).map_err(|e| oracle_err(format!("malformed reply: {e}")))?;
    if reply.id != request.request_id {
        return Err(oracle_err(format!("reply id {} does not match request id {}", reply.id, request.request_id)));
    }
    match (reply.mean, reply.error) {
        (_, Some(message)) => Err(oracle_err(format!("oracle reported: {message}"))),
        (Some(mean), None) => {
            let forecast = OracleForecast { mean, request_id: reply.id };
            covadapt_core::oracle::check_reply(request, &forecast)?;
            Ok(forecast)
        }
        (None, None) => Err(oracle_err("reply has neither 'mean' nor 'error'")),
    }
}

/// A child process answering one request line with one reply line.
pub struct ExecOracle {
    command: String,
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl fmt::Debug for ExecOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExecOracle").field("command", &self.command).field("timeout", &self.timeout).finish()
    }
}

impl ExecOracle {
    /// Spawns `command` through `sh -c`; stderr is inherited.
    pub fn spawn(command: &str, timeout: Duration) -> CoreResult<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| oracle_err(format!("cannot start '{command}': {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self { command: command.to_string(), child, stdin, lines, timeout })
    }

    fn exited(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => format!("oracle process exited with {status}"),
            _ => "oracle process closed its output".to_string(),
        }
    }
}

impl Oracle for ExecOracle {
    fn forecast(&mut self, request: &OracleRequest) -> CoreResult<OracleForecast> {
        let mut line = encode_request(request);
        line.push('\n');
        if let Err(e) = self.stdin.write_all(line.as_bytes()).and_then(|_| self.stdin.flush()) {
            let why = self.exited();
            return Err(oracle_err(format!("cannot write request: {e} ({why})")));
        }
        loop {
            match self.lines.recv_timeout(self.timeout) {
                Ok(Ok(reply)) if reply.trim().is_empty() => continue,
                Ok(Ok(reply)) => return decode_reply(request, &reply),
                Ok(Err(e)) => return Err(oracle_err(format!("cannot read reply: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(oracle_err(format!(
                        "no reply to request {} within {:?}",
                        request.request_id, self.timeout
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    thread::sleep(Duration::from_millis(20));
                    return Err(oracle_err(self.exited()));
                }
            }
        }
    }
}

impl Drop for ExecOracle {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// POSTs each request as a JSON body and reads the reply object.
#[derive(Debug)]
pub struct HttpOracle {
    url: String,
    agent: ureq::Agent,
}

impl HttpOracle {
    pub fn new(url: &str, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { url: url.to_string(), agent }
    }
}

impl Oracle for HttpOracle {
    fn forecast(&mut self, request: &OracleRequest) -> CoreResult<OracleForecast> {
        let body = encode_request(request);
        let response = self
            .agent
            .post(&self.url)
            .set("Content-Type", "application/json")
            .send_string(&body)
            .map_err(|e| oracle_err(format!("{}: {e}", self.url)))?;
        let text = response.into_string().map_err(|e| oracle_err(format!("{}: {e}", self.url)))?;
        decode_reply(request, &text)
    }
}

/// `seasonal-naive | ar:<order> | exec:<command> | http:<url>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum OracleSelector {
    SeasonalNaive,
    Ar(usize),
    Exec(String),
    Http(String),
}

impl OracleSelector {
    pub fn is_builtin(&self) -> bool {
        matches!(self, OracleSelector::SeasonalNaive | OracleSelector::Ar(_))
    }

    /// Opens a fresh connection; built-ins use the instance seasonality.
    pub fn connect(&self, seasonality: usize, timeout: Duration) -> CoreResult<Box<dyn Oracle + Send>> {
        Ok(match self {
            OracleSelector::SeasonalNaive => Box::new(builtin_seasonal_naive(seasonality)?),
            OracleSelector::Ar(order) => Box::new(builtin_ar(*order, DEFAULT_AR_PENALTY)?),
            OracleSelector::Exec(command) => Box::new(ExecOracle::spawn(command, timeout)?),
            OracleSelector::Http(url) => Box::new(HttpOracle::new(url, timeout)),
        })
    }
}

impl fmt::Display for OracleSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSelector::SeasonalNaive => f.write_str("seasonal-naive"),
            OracleSelector::Ar(order) => write!(f, "ar:{order}"),
            OracleSelector::Exec(command) => write!(f, "exec:{command}"),
            OracleSelector::Http(url) => write!(f, "http:{url}"),
        }
    }
}

impl FromStr for OracleSelector {
    type Err = covadapt_core::Error;

    fn from_str(s: &str) -> CoreResult<Self> {
        let config = |m: String| covadapt_core::Error::Config(m);
        if s == "seasonal-naive" {
            return Ok(OracleSelector::SeasonalNaive);
        }
        match s.split_once(':') {
            Some(("ar", order)) => match order.parse::<usize>() {
                Ok(p) if p >= 1 => Ok(OracleSelector::Ar(p)),
                _ => Err(config(format!("invalid AR order '{order}'"))),
            },
            Some(("exec", command)) if !command.trim().is_empty() => Ok(OracleSelector::Exec(command.to_string())),
            // the url keeps its scheme: "http:http://host/forecast"
            Some(("http", url)) if !url.is_empty() => Ok(OracleSelector::Http(url.to_string())),
            _ => Err(config(format!("unknown oracle selector '{s}'"))),
        }
    }
}

impl From<OracleSelector> for String {
    fn from(s: OracleSelector) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for OracleSelector {
    type Error = covadapt_core::Error;

    fn try_from(s: String) -> CoreResult<Self> {
        s.parse()
    }
}
