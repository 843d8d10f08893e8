#include "climdown/downscale/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "climdown/downscale/loss.hpp"
#include "climdown/error.hpp"
#include "climdown/rng.hpp"
#include "climdown/tensor/optim.hpp"

namespace climdown::downscale {

namespace tn = climdown::tensor;

void write_train_log_csv(std::ostream& os, const TrainLog& log) {
  os << "epoch,train_loss,val_loss,best_loss,wall_ms\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  for (const auto& e : log.epochs) {
    os << e.epoch << ',' << num(e.train_loss) << ',' << (e.val_loss ? num(*e.val_loss) : "") << ','
       << num(e.best) << ',' << num(e.wall_ms) << '\n';
  }
}

double normalized_mse(const TrainedModel& m, const Dataset& d) {
  if (d.size() == 0) throw ValidationError("normalized_mse: empty dataset");
  tn::NoGradGuard ng;
  const auto coords = m.coords_for(d);
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  double total = 0.0;
  const std::size_t batch = 16;
  for (std::size_t start = 0; start < idx.size(); start += batch) {
    const auto part = std::span<const std::size_t>(idx).subspan(start, std::min(batch, idx.size() - start));
    const auto y = m.net->forward(batch_inputs(d, part, m.norm), coords, false);
    total += tn::mse(y, batch_targets(d, part, m.norm)).item() * static_cast<double>(part.size());
  }
  return total / static_cast<double>(d.size());
}

TrainOutcome train(const ArchConfig& arch, const Dataset& train_set, const Dataset& val,
                   const TrainConfig& tc, const std::filesystem::path& ckpt_dir) {
  arch.validate();
  tc.validate();
  if (train_set.size() == 0) throw ValidationError("train: empty training set");
  if (val.size() && !(val.shape == train_set.shape))
    throw ValidationError("train: validation shape differs from training shape");

  TrainOutcome out;
  out.model.net = make_downscaler(arch, train_set.shape);
  out.model.norm = Normalizer::fit(train_set);
  out.model.bounds = train_set.bounds();
  auto& net = *out.model.net;
  const auto coords = out.model.coords_for(train_set);
  const auto loss_kind = tc.loss_for(arch.kind);

  tn::Optimizer opt(tn::parse_optimizer(tc.optimizer), tc.lr, net.params().tensors());
  Rng rng(tc.seed, 0x7a11);
  std::vector<std::size_t> idx(train_set.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});

  auto snapshot = net.params().flat_values();
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  auto& log = out.log;

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    double total = 0.0;
    try {
      for (std::size_t start = 0; start < idx.size(); start += tc.batch_size) {
        const auto part = std::span<const std::size_t>(idx).subspan(start, std::min(tc.batch_size, idx.size() - start));
        opt.zero_grad();
        const auto pred = net.forward(batch_inputs(train_set, part, out.model.norm), coords, true);
        const auto y = batch_targets(train_set, part, out.model.norm);
        auto loss = loss_kind == LossKind::kImbalance ? imbalance_weighted_mse(pred, y, arch.alpha) : tn::mse(pred, y);
        if (!std::isfinite(loss.item())) throw NumericFault("non-finite training loss");
        loss.backward();
        opt.step();
        total += loss.item() * static_cast<double>(part.size());
      }
    } catch (const NumericFault& e) {
      log.fault = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = total / static_cast<double>(idx.size());
    double score = rec.train_loss;
    if (val.size()) {
      try {
        rec.val_loss = normalized_mse(out.model, val);
      } catch (const NumericFault& e) {
        log.fault = "epoch " + std::to_string(epoch) + " validation: " + e.what();
        break;
      }
      score = *rec.val_loss;
    }
    if (!std::isfinite(score)) {
      log.fault = "epoch " + std::to_string(epoch) + ": non-finite loss";
      break;
    }
    if (score < best) {
      best = score;
      since_best = 0;
      log.best_epoch = epoch;
      snapshot = net.params().flat_values();
      if (!ckpt_dir.empty()) out.model.save(ckpt_dir, {{"epoch", epoch}, {"selection_loss", score}});
    } else {
      ++since_best;
    }
    rec.best = best;
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back(rec);
    if (tc.patience && since_best >= tc.patience) {
      log.stopped_early = true;
      break;
    }
  }
  net.params().set_flat_values(snapshot);
  if (!ckpt_dir.empty() && log.best_epoch == 0) out.model.save(ckpt_dir, {{"epoch", 0}});
  return out;
}

}  // namespace climdown::downscale
