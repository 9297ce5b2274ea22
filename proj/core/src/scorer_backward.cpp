#include <cmath>

#include "damr/error.hpp"
#include "scorer_internal.hpp"

namespace damr::scorer::detail {

namespace {

Mat gelu_grad_of(const Mat& x) { return x.unaryExpr([](double v) { return gelu_grad(v); }); }

// Returns dL/dx for y = LN(x); accumulates gain/bias gradients.
Mat layer_norm_backward(const Mat& dy, const Mat& xhat, const Vec& rstd, const Mat& g, Mat& dg,
                        Mat& db) {
  dg += (dy.array() * xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  const Mat dxhat = dy.array().rowwise() * g.row(0).array();
  const double inv_n = 1.0 / static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() * inv_n;
    const double mean_dx = dxhat.row(i).dot(xhat.row(i)) * inv_n;
    dx.row(i) = rstd(i) * (dxhat.row(i).array() - mean_d - xhat.row(i).array() * mean_dx).matrix();
  }
  return dx;
}

}  // namespace

InputGrads backward(const ScorerParams& p, const Forward& f, const Vec& dscores,
                    ScorerParams& grads) {
  const Eigen::Index d = static_cast<Eigen::Index>(p.dims.d);
  const auto nseg = static_cast<Eigen::Index>(f.segs.size());
  for (const auto& sg : f.segs) {
    if (sg.rows != sg.valid) throw_precondition("backward requires an unpadded forward pass");
  }
  if (dscores.size() != nseg) throw_precondition("one score gradient per path is required");

  // Head MLP.
  grads.head_w2.noalias() += f.hg.transpose() * dscores;
  grads.head_b2(0, 0) += dscores.sum();
  const Mat dhz = (dscores * p.head_w2.transpose()).cwiseProduct(gelu_grad_of(f.hz));
  grads.head_w1.noalias() += f.u.transpose() * dhz;
  grads.head_b1 += dhz.colwise().sum();
  const Mat du = dhz * p.head_w1.transpose();
  const Mat ds = du.leftCols(d);
  Mat dqh = du.rightCols(d);

  // Attention pooling.
  Mat dh(f.h.rows(), d);
  Vec dlogits(f.h.rows());
  for (Eigen::Index si = 0; si < nseg; ++si) {
    const Segment& sg = f.segs[static_cast<std::size_t>(si)];
    const auto al = f.alpha.segment(sg.offset, sg.rows);
    dh.middleRows(sg.offset, sg.rows) = al * ds.row(si);
    const Vec dalpha = f.h.middleRows(sg.offset, sg.rows) * ds.row(si).transpose();
    dlogits.segment(sg.offset, sg.rows) = al.array() * (dalpha.array() - al.dot(dalpha));
  }
  grads.pool_w2.noalias() += f.gp.transpose() * dlogits;
  grads.pool_b2(0, 0) += dlogits.sum();
  const Mat dzp = (dlogits * p.pool_w2.transpose()).cwiseProduct(gelu_grad_of(f.zp));
  grads.pool_w1.noalias() += f.h.transpose() * dzp;
  grads.pool_b1 += dzp.colwise().sum();
  dh.noalias() += dzp * p.pool_w1.transpose();

  // Question injection.
  Mat dc(nseg, d);
  for (Eigen::Index si = 0; si < nseg; ++si) {
    const Segment& sg = f.segs[static_cast<std::size_t>(si)];
    dc.row(si) = dh.middleRows(sg.offset, sg.rows).colwise().sum();
  }
  grads.cross_wv.noalias() += f.qh.transpose() * dc;
  grads.cross_bv += dc.colwise().sum();
  dqh.noalias() += dc * p.cross_wv.transpose();

  Mat dx = std::move(dh);
  const Eigen::Index dk = d / static_cast<Eigen::Index>(p.dims.heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const Eigen::Index total = f.x0.rows();
  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const LayerParams& l = p.layers[li];
    const LayerCache& c = f.layers[li];
    LayerParams& gl = grads.layers[li];

    // Feed-forward block.
    gl.w2.noalias() += c.g.transpose() * dx;
    gl.b2 += dx.colwise().sum();
    const Mat df1 = (dx * l.w2.transpose()).cwiseProduct(gelu_grad_of(c.f1));
    gl.w1.noalias() += c.b.transpose() * df1;
    gl.b1 += df1.colwise().sum();
    const Mat dx1 = dx + layer_norm_backward(df1 * l.w1.transpose(), c.xhat2, c.rstd2, l.ln2_g,
                                             gl.ln2_g, gl.ln2_b);

    // Self-attention block.
    gl.wo.noalias() += c.o.transpose() * dx1;
    gl.bo += dx1.colwise().sum();
    const Mat dout = dx1 * l.wo.transpose();
    Mat dq(total, d), dkm(total, d), dv(total, d);
    for (Eigen::Index si = 0; si < nseg; ++si) {
      const Segment& sg = f.segs[static_cast<std::size_t>(si)];
      for (std::size_t h = 0; h < p.dims.heads; ++h) {
        const Eigen::Index off = static_cast<Eigen::Index>(h) * dk;
        const Mat& pr = c.probs[static_cast<std::size_t>(si) * p.dims.heads + h];
        const auto doh = dout.block(sg.offset, off, sg.rows, dk);
        const Mat dp = doh * c.v.block(sg.offset, off, sg.rows, dk).transpose();
        dv.block(sg.offset, off, sg.rows, dk) = pr.transpose() * doh;
        const Vec row_dot = (dp.array() * pr.array()).rowwise().sum();
        const Mat dsc = (pr.array() * (dp.array().colwise() - row_dot.array())).matrix() * scale;
        dq.block(sg.offset, off, sg.rows, dk) = dsc * c.k.block(sg.offset, off, sg.rows, dk);
        dkm.block(sg.offset, off, sg.rows, dk) =
            dsc.transpose() * c.q.block(sg.offset, off, sg.rows, dk);
      }
    }
    gl.wq.noalias() += c.a.transpose() * dq;
    gl.bq += dq.colwise().sum();
    gl.wk.noalias() += c.a.transpose() * dkm;
    gl.bk += dkm.colwise().sum();
    gl.wv.noalias() += c.a.transpose() * dv;
    gl.bv += dv.colwise().sum();
    const Mat da = dq * l.wq.transpose() + dkm * l.wk.transpose() + dv * l.wv.transpose();
    dx = dx1 + layer_norm_backward(da, c.xhat1, c.rstd1, l.ln1_g, gl.ln1_g, gl.ln1_b);
  }

  for (const auto& sg : f.segs) grads.pos.topRows(sg.rows) += dx.middleRows(sg.offset, sg.rows);
  return {std::move(dqh), std::move(dx)};
}

}  // namespace damr::scorer::detail
