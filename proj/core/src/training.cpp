#include "mgdun/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "mgdun/metrics.hpp"
#include "mgdun/rng.hpp"
#include "mgdun/tensor_io.hpp"

namespace mgdun {

void TrainConfig::validate() const {
    require(lr >= 0.0f, "TrainConfig: lr must be >= 0");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(epochs >= 0 && max_iters >= 0, "TrainConfig: counts must be >= 0");
    require(val_every >= 1, "TrainConfig: val_every must be >= 1");
}

AdamState AdamState::init(const MgdunModel& model) {
    AdamState s;
    for (int i = 0; i < model.param_count(); ++i) {
        s.m.emplace_back(model.param(i).shape());
        s.v.emplace_back(model.param(i).shape());
    }
    return s;
}

float l1_loss(const Tensor& pred, const Tensor& gt) {
    require(pred.shape() == gt.shape(), "l1_loss: shape mismatch " +
                                            pred.shape().str() + " vs " +
                                            gt.shape().str());
    return mean_abs(sub(pred, gt));
}

Var l1_loss(Tape& t, Var pred, Var gt) {
    require(t.val(pred).shape() == t.val(gt).shape(),
            "l1_loss: shape mismatch " + t.val(pred).shape().str() + " vs " +
                t.val(gt).shape().str());
    return t.mean_abs(t.sub(pred, gt));
}

void adam_step(MgdunModel& model, const std::vector<Tensor>& grads,
               AdamState& state, const TrainConfig& cfg) {
    require(int(grads.size()) == model.param_count(), "adam_step: grad count mismatch");
    ++state.step;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double bc1 = 1.0 - std::pow(b1, double(state.step));
    const double bc2 = 1.0 - std::pow(b2, double(state.step));
    for (int p = 0; p < model.param_count(); ++p) {
        Tensor& m = state.m[std::size_t(p)];
        Tensor& v = state.v[std::size_t(p)];
        const Tensor* g = &grads[std::size_t(p)];
        Tensor zero;
        if (g->empty()) {
            zero = Tensor(m.shape());
            g = &zero;
        }
        if (!g->all_finite())
            throw std::runtime_error("adam_step: non-finite gradient for parameter " +
                                     model.param_name(p));
        Tensor& w = model.param(p);
        for (std::int64_t i = 0; i < w.numel(); ++i) {
            const double gi = double((*g)[i]);
            m[i] = float(b1 * m[i] + (1.0 - b1) * gi);
            v[i] = float(b2 * v[i] + (1.0 - b2) * gi * gi);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] = float(w[i] - double(cfg.lr) * mhat / (std::sqrt(vhat) + cfg.adam_eps));
        }
    }
}

namespace {

// Stack the problems' tensors along the batch axis.
Tensor stack_batch(const std::vector<ReconProblem>& set,
                   const std::vector<int>& idx, const Tensor ReconProblem::* field) {
    const Tensor& first = set[std::size_t(idx[0])].*field;
    Shape s = first.shape();
    s.n = int(idx.size());
    Tensor out(s);
    const std::int64_t per = first.numel();
    for (std::size_t k = 0; k < idx.size(); ++k)
        std::copy_n((set[std::size_t(idx[k])].*field).data(), per,
                    out.data() + std::int64_t(k) * per);
    return out;
}

double validate_psnr(const MgdunModel& model, const std::vector<ReconProblem>& val_set) {
    double acc = 0.0;
    for (const auto& pr : val_set) {
        Tensor pred = mgdun_forward(model, pr.x, pr.y);
        acc += psnr(pred, pr.z);
    }
    return acc / double(val_set.size());
}

}  // namespace

TrainResult train(const TrainConfig& cfg, MgdunModel model,
                  const std::vector<ReconProblem>& train_set,
                  const std::vector<ReconProblem>& val_set) {
    cfg.validate();
    require(!train_set.empty(), "train: empty training set");
    for (const auto& pr : train_set)
        require(pr.has_ground_truth(), "train: every training problem needs ground truth");

    if (cfg.freeze_eta)
        for (const auto& st : model.stage_ids()) model.param(st.eta)[0] = 0.0f;

    AdamState adam = AdamState::init(model);
    TrainResult res;
    res.best_val_psnr = -std::numeric_limits<double>::infinity();

    const int per_epoch =
        int((train_set.size() + std::size_t(cfg.batch_size) - 1) / std::size_t(cfg.batch_size));
    const int total_iters =
        cfg.max_iters > 0 ? cfg.max_iters : cfg.epochs * per_epoch;

    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[std::size_t(i)] = int(i);

    int iter = 0;
    bool stop = false;
    for (int epoch = 0; !stop; ++epoch) {
        if (cfg.max_iters == 0 && epoch >= cfg.epochs) break;
        // deterministic per-epoch shuffle
        Rng shuffle_rng(cfg.seed + 0x5851f42d4c957f2dull * std::uint64_t(epoch + 1));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[std::size_t(shuffle_rng.next_u64() % std::uint64_t(i))]);

        for (int b = 0; b < per_epoch && !stop; ++b) {
            if (iter >= total_iters) { stop = true; break; }
            std::vector<int> idx;
            for (int k = 0; k < cfg.batch_size; ++k)
                idx.push_back(order[std::size_t((b * cfg.batch_size + k) % int(order.size()))]);

            Tape tape;
            BoundModel bm = bind_model(tape, model, true);
            Var xb = tape.leaf(stack_batch(train_set, idx, &ReconProblem::x));
            Var yb = tape.leaf(stack_batch(train_set, idx, &ReconProblem::y));
            Var zb = tape.leaf(stack_batch(train_set, idx, &ReconProblem::z));
            Var loss = l1_loss(tape, mgdun_forward(tape, bm, xb, yb), zb);
            const double loss_val = double(tape.val(loss)[0]);
            ++iter;

            if (!std::isfinite(loss_val)) {
                std::fprintf(stderr,
                             "[mgdun] train: non-finite loss at iteration %d; "
                             "keeping last good state\n", iter);
                res.diverged = true;
                stop = true;
                break;
            }

            tape.backward(loss);
            std::vector<Tensor> grads;
            grads.reserve(std::size_t(model.param_count()));
            for (int p = 0; p < model.param_count(); ++p)
                grads.push_back(tape.grad(bm[p]));
            if (cfg.freeze_eta)
                for (const auto& st : model.stage_ids())
                    grads[std::size_t(st.eta)] = Tensor({1, 1, 1, 1});
            adam_step(model, grads, adam, cfg);
            if (cfg.freeze_eta)
                for (const auto& st : model.stage_ids()) model.param(st.eta)[0] = 0.0f;

            LossRow row{iter, loss_val, std::numeric_limits<double>::quiet_NaN()};
            if (!val_set.empty() && (iter % cfg.val_every == 0 || iter == total_iters)) {
                row.val_psnr = validate_psnr(model, val_set);
                if (row.val_psnr > res.best_val_psnr) {
                    res.best_val_psnr = row.val_psnr;
                    res.best_iter = iter;
                    res.best_model = model;
                }
            }
            res.trace.push_back(row);
            if (iter >= total_iters) stop = true;
        }
    }

    res.iters_run = iter;
    if (res.best_iter == 0) {
        res.best_model = model;
        if (!val_set.empty()) res.best_val_psnr = validate_psnr(model, val_set);
    }
    res.final_model = std::move(model);
    return res;
}

// --- checkpoints --------------------------------------------------------------

namespace {
constexpr const char* kCkptMagic = "MGDUNCKPT 1";
}

void checkpoint_save(const MgdunModel& model, const std::string& path,
                     const AdamState* adam) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint_save: cannot open " + path);
    const ModelConfig& c = model.config();
    f << kCkptMagic << "\n";
    f << "channels " << c.channels << "\n";
    f << "scale " << c.scale << "\n";
    f << "stages " << c.stages << "\n";
    f << "inn_blocks " << c.inn_blocks << "\n";
    f << "unet_width " << c.unet_width << "\n";
    f << "unet_depth " << c.unet_depth << "\n";
    f << "inn_hidden " << c.inn_hidden << "\n";
    f << "seed " << model.seed() << "\n";
    f << "params " << model.param_count() << "\n";
    for (int i = 0; i < model.param_count(); ++i) {
        f << model.param_name(i) << "\n";
        write_mgt(model.param(i), f);
    }
    if (adam) {
        f << "adam " << adam->step << "\n";
        for (int i = 0; i < model.param_count(); ++i) {
            f << model.param_name(i) << ".m\n";
            write_mgt(adam->m[std::size_t(i)], f);
            f << model.param_name(i) << ".v\n";
            write_mgt(adam->v[std::size_t(i)], f);
        }
    }
    if (!f) throw std::runtime_error("checkpoint_save: write failed for " + path);
}

MgdunModel checkpoint_load(const std::string& path, AdamState* adam) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint_load: cannot open " + path);
    std::string line;
    std::getline(f, line);
    if (line != kCkptMagic)
        throw std::runtime_error("checkpoint_load: bad magic in " + path +
                                 " (got '" + line + "')");
    ModelConfig cfg;
    std::uint64_t seed = 0;
    int n_params = -1;
    while (std::getline(f, line)) {
        const auto sp = line.find(' ');
        if (sp == std::string::npos)
            throw std::runtime_error("checkpoint_load: malformed header line '" + line + "'");
        const std::string key = line.substr(0, sp);
        const std::string val = line.substr(sp + 1);
        if (key == "channels") cfg.channels = std::stoi(val);
        else if (key == "scale") cfg.scale = std::stoi(val);
        else if (key == "stages") cfg.stages = std::stoi(val);
        else if (key == "inn_blocks") cfg.inn_blocks = std::stoi(val);
        else if (key == "unet_width") cfg.unet_width = std::stoi(val);
        else if (key == "unet_depth") cfg.unet_depth = std::stoi(val);
        else if (key == "inn_hidden") cfg.inn_hidden = std::stoi(val);
        else if (key == "seed") seed = std::stoull(val);
        else if (key == "params") { n_params = std::stoi(val); break; }
        else throw std::runtime_error("checkpoint_load: unknown header key '" + key + "'");
    }
    if (n_params < 0)
        throw std::runtime_error("checkpoint_load: missing params section in " + path);

    MgdunModel model = MgdunModel::init(cfg, seed);
    require(n_params == model.param_count(),
            "checkpoint_load: parameter count " + std::to_string(n_params) +
                " does not match architecture (" + std::to_string(model.param_count()) +
                ")");
    for (int i = 0; i < n_params; ++i) {
        std::getline(f, line);
        const int id = model.find_param(line);
        if (id < 0)
            throw std::runtime_error("checkpoint_load: unknown parameter '" + line + "'");
        Tensor t = read_mgt(f);
        require(t.shape() == model.param(id).shape(),
                "checkpoint_load: shape mismatch for " + line + ": " +
                    t.shape().str() + " vs " + model.param(id).shape().str());
        model.param(id) = std::move(t);
    }
    if (adam) {
        *adam = AdamState::init(model);
        if (std::getline(f, line) && line.rfind("adam ", 0) == 0) {
            adam->step = std::stol(line.substr(5));
            for (int i = 0; i < n_params; ++i) {
                std::getline(f, line);  // name.m
                adam->m[std::size_t(i)] = read_mgt(f);
                std::getline(f, line);  // name.v
                adam->v[std::size_t(i)] = read_mgt(f);
            }
        }
    }
    return model;
}

}  // namespace mgdun
