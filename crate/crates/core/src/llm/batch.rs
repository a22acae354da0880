use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{ChatClient, LlmError, LlmRequest};

/// Applies `f` to every item with at most `max_in_flight` calls running at
/// once. Results come back in input order.
pub fn parallel_map<T, R, F>(items: &[T], max_in_flight: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    assert!(max_in_flight >= 1, "max_in_flight must be at least 1");
    if max_in_flight == 1 || items.len() <= 1 {
        return items.iter().enumerate().map(|(i, item)| f(i, item)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..max_in_flight.min(items.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let result = f(i, &items[i]);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("every index is processed"))
        .collect()
}

#[derive(Debug)]
pub struct BatchOutcome {
    pub responses: Vec<Result<String, LlmError>>,
}

impl BatchOutcome {
    pub fn failed_indices(&self) -> Vec<usize> {
        self.responses
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_err())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn success_count(&self) -> usize {
        self.responses.iter().filter(|r| r.is_ok()).count()
    }

    /// One line per failure: `index: error`.
    pub fn error_report(&self) -> String {
        self.responses
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().err().map(|e| format!("{i}: {e}")))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Runs `(request, trial)` pairs against `client`; failures are isolated per request.
pub fn run_batch(client: &dyn ChatClient, requests: &[(LlmRequest, u32)], max_in_flight: usize) -> BatchOutcome {
    let responses = parallel_map(requests, max_in_flight, |_, (request, trial)| {
        client.complete(request, *trial)
    });
    BatchOutcome { responses }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{FnClient, RequestTemplate};
    use std::time::Duration;

    fn requests(n: usize) -> Vec<(LlmRequest, u32)> {
        let template = RequestTemplate::new("m");
        (0..n).map(|i| (template.request(&format!("q{i}")), 0)).collect()
    }

    fn echo() -> impl ChatClient {
        FnClient::new(|req: &LlmRequest, _| {
            let prompt = req.last_user_prompt().unwrap().to_string();
            // vary completion order
            let n: u64 = prompt[1..].parse().unwrap();
            std::thread::sleep(Duration::from_micros((n * 7919) % 500));
            Ok(format!("answer to {prompt}"))
        })
    }

    #[test]
    fn concurrent_matches_sequential() {
        let reqs = requests(100);
        let client = echo();
        let sequential = run_batch(&client, &reqs, 1);
        let concurrent = run_batch(&client, &reqs, 8);
        let seq: Vec<_> = sequential.responses.into_iter().map(Result::unwrap).collect();
        let con: Vec<_> = concurrent.responses.into_iter().map(Result::unwrap).collect();
        assert_eq!(seq, con);
        assert_eq!(con[42], "answer to q42");
    }

    #[test]
    fn in_flight_bound_is_respected() {
        let active = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let items: Vec<usize> = (0..64).collect();
        parallel_map(&items, 3, |_, _| {
            let now = active.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(1));
            active.fetch_sub(1, Ordering::SeqCst);
        });
        assert!(peak.load(Ordering::SeqCst) <= 3);
    }

    #[test]
    fn failures_are_isolated() {
        let client = FnClient::new(|req: &LlmRequest, _| {
            let prompt = req.last_user_prompt().unwrap();
            if prompt == "q3" {
                Err(LlmError::Client { status: 400, body: "bad".into() })
            } else {
                Ok(prompt.to_string())
            }
        });
        let outcome = run_batch(&client, &requests(10), 4);
        assert_eq!(outcome.success_count(), 9);
        assert_eq!(outcome.failed_indices(), vec![3]);
        assert!(outcome.error_report().starts_with("3: "));
    }
}
