use std::future::Future;

use futures::stream::{self, StreamExt};
use futures::FutureExt;

/// Run `f` over `items` with at most `parallelism` futures in flight and
/// return the results in input order.
/// Futures are boxed and collected up front so no closure ends up in the
/// stream type; that keeps batches `Send` for callers that spawn them.
pub(crate) async fn ordered<'a, T, F, Fut, R>(items: impl IntoIterator<Item = T>, parallelism: usize, mut f: F) -> Vec<R>
where
    F: FnMut(T) -> Fut,
    Fut: Future<Output = R> + Send + 'a,
{
    let futures: Vec<_> = items.into_iter().map(|x| f(x).boxed()).collect();
    stream::iter(futures).buffered(parallelism.max(1)).collect().await
}
