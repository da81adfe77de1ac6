//! Reverse replay of recorded operations.
//!
//! Each `backward` call runs with a fresh transient adjoint buffer and
//! adds the resulting leaf adjoints into the per-node `grad` fields, so
//! repeated calls without a reset accumulate.

use std::rc::Rc;

use super::kernels;
use super::{log_softmax, softmax_backward_lanes, Elem, Graph, Op};
use crate::error::{Error, Result};

pub(super) fn run(graph: &Rc<Graph>, loss_id: usize) -> Result<()> {
    let mut nodes = graph.nodes.borrow_mut();
    {
        let loss = &nodes[loss_id];
        if loss.data.len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                loss.shape
            )));
        }
        if !loss.requires_grad {
            return Err(Error::Contract(
                "backward on a tensor with no requires_grad ancestry".into(),
            ));
        }
    }

    let mut adj: Vec<Option<Vec<Elem>>> = vec![None; loss_id + 1];
    adj[loss_id] = Some(vec![1.0]);

    for id in (0..=loss_id).rev() {
        let upstream = match adj[id].take() {
            Some(g) => g,
            None => continue,
        };
        if !nodes[id].requires_grad {
            continue;
        }
        if matches!(nodes[id].op, Op::Leaf) {
            let node = &mut nodes[id];
            let grad = node.grad.get_or_insert_with(|| vec![0.0; node.data.len()]);
            for (g, &u) in grad.iter_mut().zip(&upstream) {
                *g += u;
            }
            continue;
        }

        match &nodes[id].op {
            Op::Leaf => unreachable!(),
            &Op::Matmul { a, b } => {
                let (m, k) = (nodes[a].shape[0], nodes[a].shape[1]);
                let n = nodes[b].shape[1];
                if nodes[a].requires_grad {
                    let da = kernels::matmul_nt(&upstream, &nodes[b].data, m, n, k);
                    accumulate(&mut adj, a, &da);
                }
                if nodes[b].requires_grad {
                    let db = kernels::matmul_tn(&nodes[a].data, &upstream, m, k, n);
                    accumulate(&mut adj, b, &db);
                }
            }
            &Op::Bmm { a, b } => {
                let (bs, m, k) = (nodes[a].shape[0], nodes[a].shape[1], nodes[a].shape[2]);
                let n = nodes[b].shape[2];
                if nodes[a].requires_grad {
                    let da = kernels::bmm_nt(&upstream, &nodes[b].data, bs, m, n, k);
                    accumulate(&mut adj, a, &da);
                }
                if nodes[b].requires_grad {
                    let db = kernels::bmm_tn(&nodes[a].data, &upstream, bs, m, k, n);
                    accumulate(&mut adj, b, &db);
                }
            }
            &Op::BmmT { a, b } => {
                // C[i] = A[i]·B[i]ᵀ with A [bs,m,k], B [bs,n,k].
                let (bs, m, k) = (nodes[a].shape[0], nodes[a].shape[1], nodes[a].shape[2]);
                let n = nodes[b].shape[1];
                if nodes[a].requires_grad {
                    let da = kernels::bmm_nn(&upstream, &nodes[b].data, bs, m, n, k);
                    accumulate(&mut adj, a, &da);
                }
                if nodes[b].requires_grad {
                    let db = kernels::bmm_tn(&upstream, &nodes[a].data, bs, m, n, k);
                    accumulate(&mut adj, b, &db);
                }
            }
            &Op::Add { a, b } => {
                if nodes[a].requires_grad {
                    accumulate(&mut adj, a, &upstream);
                }
                if nodes[b].requires_grad {
                    accumulate(&mut adj, b, &upstream);
                }
            }
            &Op::Mul { a, b } => {
                if nodes[a].requires_grad {
                    let da: Vec<Elem> =
                        upstream.iter().zip(&nodes[b].data).map(|(&u, &y)| u * y).collect();
                    accumulate(&mut adj, a, &da);
                }
                if nodes[b].requires_grad {
                    let db: Vec<Elem> =
                        upstream.iter().zip(&nodes[a].data).map(|(&u, &x)| u * x).collect();
                    accumulate(&mut adj, b, &db);
                }
            }
            &Op::Scale { x, c } => {
                if nodes[x].requires_grad {
                    let dx: Vec<Elem> = upstream.iter().map(|&u| u * c).collect();
                    accumulate(&mut adj, x, &dx);
                }
            }
            &Op::AddRowBias { x, bias } => {
                let n = nodes[bias].data.len();
                if nodes[x].requires_grad {
                    accumulate(&mut adj, x, &upstream);
                }
                if nodes[bias].requires_grad {
                    let mut db = vec![0.0; n];
                    for (i, &u) in upstream.iter().enumerate() {
                        db[i % n] += u;
                    }
                    accumulate(&mut adj, bias, &db);
                }
            }
            &Op::Relu { x } => {
                if nodes[x].requires_grad {
                    let dx: Vec<Elem> = upstream
                        .iter()
                        .zip(&nodes[x].data)
                        .map(|(&u, &v)| if v > 0.0 { u } else { 0.0 })
                        .collect();
                    accumulate(&mut adj, x, &dx);
                }
            }
            &Op::Softmax { x, axis } => {
                if nodes[x].requires_grad {
                    let mut dx = vec![0.0; nodes[x].data.len()];
                    softmax_backward_lanes(&nodes[id].data, &upstream, &nodes[id].shape, axis, &mut dx);
                    accumulate(&mut adj, x, &dx);
                }
            }
            Op::LayerNorm { x, gain, bias, mean_rstd } => {
                let (x, gain, bias) = (*x, *gain, *bias);
                let n = nodes[gain].data.len();
                let rows = nodes[x].data.len() / n;
                let xd = &nodes[x].data;
                let g = &nodes[gain].data;
                let mut dx = vec![0.0; xd.len()];
                let mut dg = vec![0.0; n];
                let mut db = vec![0.0; n];
                for r in 0..rows {
                    let mean = mean_rstd[2 * r];
                    let rstd = mean_rstd[2 * r + 1];
                    let xrow = &xd[r * n..(r + 1) * n];
                    let urow = &upstream[r * n..(r + 1) * n];
                    let mut sum_dxhat = 0.0;
                    let mut sum_dxhat_xhat = 0.0;
                    for j in 0..n {
                        let xhat = (xrow[j] - mean) * rstd;
                        let dxhat = urow[j] * g[j];
                        sum_dxhat += dxhat;
                        sum_dxhat_xhat += dxhat * xhat;
                        dg[j] += urow[j] * xhat;
                        db[j] += urow[j];
                    }
                    let inv_n = 1.0 / n as Elem;
                    for j in 0..n {
                        let xhat = (xrow[j] - mean) * rstd;
                        let dxhat = urow[j] * g[j];
                        dx[r * n + j] =
                            rstd * (dxhat - inv_n * sum_dxhat - xhat * inv_n * sum_dxhat_xhat);
                    }
                }
                if nodes[x].requires_grad {
                    accumulate(&mut adj, x, &dx);
                }
                if nodes[gain].requires_grad {
                    accumulate(&mut adj, gain, &dg);
                }
                if nodes[bias].requires_grad {
                    accumulate(&mut adj, bias, &db);
                }
            }
            Op::Dropout { x, multiplier } => {
                let x = *x;
                if nodes[x].requires_grad {
                    let dx: Vec<Elem> =
                        upstream.iter().zip(multiplier).map(|(&u, &m)| u * m).collect();
                    accumulate(&mut adj, x, &dx);
                }
            }
            Op::EmbedLookup { table, ids } => {
                let table = *table;
                if nodes[table].requires_grad {
                    let d = nodes[table].shape[1];
                    let mut dt = vec![0.0; nodes[table].data.len()];
                    for (row, &tok) in ids.iter().enumerate() {
                        let src = &upstream[row * d..(row + 1) * d];
                        let dst = &mut dt[tok as usize * d..(tok as usize + 1) * d];
                        for (slot, &u) in dst.iter_mut().zip(src) {
                            *slot += u;
                        }
                    }
                    accumulate(&mut adj, table, &dt);
                }
            }
            &Op::SplitHeads { x, batch, heads } => {
                if nodes[x].requires_grad {
                    let d = nodes[x].shape[1];
                    let seq = nodes[x].shape[0] / batch;
                    let hd = d / heads;
                    let mut dx = vec![0.0; nodes[x].data.len()];
                    for b in 0..batch {
                        for h in 0..heads {
                            for s in 0..seq {
                                let from = (((b * heads + h) * seq) + s) * hd;
                                let dst = (b * seq + s) * d + h * hd;
                                for e in 0..hd {
                                    dx[dst + e] += upstream[from + e];
                                }
                            }
                        }
                    }
                    accumulate(&mut adj, x, &dx);
                }
            }
            &Op::MergeHeads { x, batch, heads } => {
                if nodes[x].requires_grad {
                    let seq = nodes[x].shape[1];
                    let hd = nodes[x].shape[2];
                    let d = heads * hd;
                    let mut dx = vec![0.0; nodes[x].data.len()];
                    for b in 0..batch {
                        for h in 0..heads {
                            for s in 0..seq {
                                let dst = (((b * heads + h) * seq) + s) * hd;
                                let from = (b * seq + s) * d + h * hd;
                                for e in 0..hd {
                                    dx[dst + e] += upstream[from + e];
                                }
                            }
                        }
                    }
                    accumulate(&mut adj, x, &dx);
                }
            }
            Op::AddMask { x, .. } | Op::Reshape { x } => {
                let x = *x;
                if nodes[x].requires_grad {
                    accumulate(&mut adj, x, &upstream);
                }
            }
            &Op::Sum { x } => {
                if nodes[x].requires_grad {
                    let dx = vec![upstream[0]; nodes[x].data.len()];
                    accumulate(&mut adj, x, &dx);
                }
            }
            Op::SmoothedCe { logits, targets, non_pad, eps, pad_id } => {
                let (logits, eps, pad_id) = (*logits, *eps, *pad_id);
                if nodes[logits].requires_grad {
                    let v = nodes[logits].shape[1];
                    let rows = nodes[logits].shape[0];
                    let n_active = non_pad.iter().filter(|&&p| p).count() as Elem;
                    let scale = upstream[0] / n_active;
                    let smooth = if eps > 0.0 { eps / (v as Elem - 2.0) } else { 0.0 };
                    let ld = &nodes[logits].data;
                    let mut dx = vec![0.0; ld.len()];
                    for r in 0..rows {
                        if !non_pad[r] {
                            continue;
                        }
                        let row = &ld[r * v..(r + 1) * v];
                        let logp = log_softmax(row);
                        let t = targets[r] as usize;
                        // q puts 1-eps on the true class, eps/(V-2) elsewhere
                        // except PAD; d(loss)/d(logit) = p - q.
                        for (k, lp) in logp.iter().enumerate() {
                            let p = lp.exp();
                            let q = if k == t {
                                1.0 - eps
                            } else if k != pad_id as usize {
                                smooth
                            } else {
                                0.0
                            };
                            dx[r * v + k] = scale * (p - q);
                        }
                    }
                    accumulate(&mut adj, logits, &dx);
                }
            }
        }
    }
    Ok(())
}

fn accumulate(adj: &mut [Option<Vec<Elem>>], id: usize, contribution: &[Elem]) {
    let slot = adj[id].get_or_insert_with(|| vec![0.0; contribution.len()]);
    for (g, &c) in slot.iter_mut().zip(contribution) {
        *g += c;
    }
}
