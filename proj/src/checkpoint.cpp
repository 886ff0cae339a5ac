#include "feasc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "feasc/config_json.hpp"

namespace fs = std::filesystem;

namespace feasc {

static_assert(std::endian::native == std::endian::little, "checkpoint data is written in host byte order");

namespace {

constexpr char kMagic[8] = {'F', 'E', 'A', 'S', 'C', 'K', 'P', 'T'};

struct Named {
  std::string name;
  const Tensor* tensor;
};

std::vector<Named> collect(const SiameseModel& model, const Sgd* optimizer) {
  std::vector<Named> out;
  auto add = [&](const std::string& prefix, const Sequential& net) {
    for (const Parameter* p : net.state()) out.push_back({prefix + "/" + p->name, &p->value});
  };
  add("encoder", model.encoder);
  add("projector", model.projector);
  add("predictor", model.predictor);
  if (model.has_separate_target()) {
    add("target_encoder", model.target_encoder);
    add("target_projector", model.target_projector);
  }
  if (optimizer)
    for (std::size_t k = 0; k < optimizer->velocity().size(); ++k)
      out.push_back({"optimizer/velocity/" + std::to_string(k), &optimizer->velocity()[k]});
  return out;
}

class BudgetWriter {
 public:
  BudgetWriter(std::ofstream& out, std::size_t budget) : out_(out), budget_(budget) {}
  void write(const void* data, std::size_t n) {
    if (budget_ && written_ + n > budget_) {
      out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(budget_ - written_));
      throw CheckpointError("no space left on device");
    }
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw CheckpointError("write failed");
    written_ += n;
  }

 private:
  std::ofstream& out_;
  std::size_t budget_;
  std::size_t written_ = 0;
};

struct Parsed {
  Json header;
  std::map<std::string, Tensor> tensors;
};

Parsed parse(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(path + ": cannot open checkpoint");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw CheckpointError(path + ": not a checkpoint file");
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (16 + header_len > bytes.size()) throw CheckpointError(path + ": truncated header");

  Parsed p;
  try {
    p.header = Json::parse(bytes.substr(16, header_len));
  } catch (const Json::exception& e) {
    throw CheckpointError(path + ": malformed header: " + e.what());
  }
  if (p.header.value("schema", "") != kCheckpointSchema)
    throw CheckpointError(path + ": unsupported schema '" + p.header.value("schema", "") + "'");

  std::size_t offset = 16 + header_len;
  for (const auto& t : p.header.at("tensors")) {
    Tensor tensor(t.at("shape").get<std::vector<int>>());
    const std::size_t n = tensor.size() * sizeof(Scalar);
    if (offset + n > bytes.size()) throw CheckpointError(path + ": truncated tensor data");
    std::memcpy(tensor.data(), bytes.data() + offset, n);
    offset += n;
    p.tensors.emplace(t.at("name").get<std::string>(), std::move(tensor));
  }
  if (offset != bytes.size()) throw CheckpointError(path + ": trailing bytes after tensor data");
  return p;
}

CheckpointMeta meta_from(const Json& h) try {
  CheckpointMeta m;
  m.framework = parse_framework(h.at("framework").get<std::string>());
  from_json_strict(h.at("encoder"), m.encoder);
  from_json_strict(h.at("head"), m.head);
  m.epoch = h.at("epoch").get<int>();
  m.step = h.at("step").get<long>();
  m.config_json = h.value("config", "");
  return m;
} catch (const Json::exception& e) {
  throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
}

void restore(Sequential& net, const std::string& prefix, const Parsed& p, const std::string& path) {
  for (Parameter* param : net.state()) {
    const std::string name = prefix + "/" + param->name;
    const auto it = p.tensors.find(name);
    if (it == p.tensors.end()) throw CheckpointError(path + ": missing tensor " + name);
    if (!it->second.same_shape(param->value))
      throw CheckpointError(path + ": shape mismatch for " + name + ": " + it->second.shape_string() + " vs " +
                            param->value.shape_string());
    param->value = it->second;
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const SiameseModel& model, const CheckpointMeta& meta, const Sgd* optimizer,
                     const CheckpointWriteOptions& options) {
  const auto tensors = collect(model, optimizer);
  Json header;
  header["schema"] = kCheckpointSchema;
  header["framework"] = to_string(meta.framework);
  header["encoder"] = to_json(meta.encoder);
  header["head"] = to_json(meta.head);
  header["epoch"] = meta.epoch;
  header["step"] = meta.step;
  header["config"] = meta.config_json;
  header["tensors"] = Json::array();
  for (const auto& t : tensors) header["tensors"].push_back({{"name", t.name}, {"shape", t.tensor->shape()}});
  const std::string text = header.dump();
  const std::uint64_t header_len = text.size();

  const fs::path target(path);
  const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
  try {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot create temporary file");
    BudgetWriter w(out, options.byte_budget);
    w.write(kMagic, 8);
    w.write(&header_len, 8);
    w.write(text.data(), text.size());
    for (const auto& t : tensors) w.write(t.tensor->data(), t.tensor->size() * sizeof(Scalar));
    out.close();
    if (!out) throw CheckpointError("close failed");
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw CheckpointError("rename failed: " + ec.message());
  } catch (const CheckpointError& e) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw CheckpointError(path + ": " + e.what());
  }
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  const Parsed p = parse(path);
  return meta_from(p.header);
}

SiameseModel load_checkpoint(const std::string& path, CheckpointMeta* meta_out) {
  const Parsed p = parse(path);
  const CheckpointMeta meta = meta_from(p.header);
  SiameseModel model(meta.framework, meta.encoder, meta.head, 0);
  restore(model.encoder, "encoder", p, path);
  restore(model.projector, "projector", p, path);
  restore(model.predictor, "predictor", p, path);
  if (model.has_separate_target()) {
    restore(model.target_encoder, "target_encoder", p, path);
    restore(model.target_projector, "target_projector", p, path);
  }
  if (meta_out) *meta_out = meta;
  return model;
}

void load_optimizer_state(const std::string& path, Sgd& optimizer) {
  const Parsed p = parse(path);
  auto& velocity = optimizer.velocity();
  for (std::size_t k = 0; k < velocity.size(); ++k) {
    const auto it = p.tensors.find("optimizer/velocity/" + std::to_string(k));
    if (it == p.tensors.end()) throw CheckpointError(path + ": no optimizer state");
    if (!it->second.same_shape(velocity[k])) throw CheckpointError(path + ": optimizer state shape mismatch");
    velocity[k] = it->second;
  }
}

Sequential load_backbone(const std::string& path, EncoderSpec* spec) {
  const Parsed p = parse(path);
  const CheckpointMeta meta = meta_from(p.header);
  Rng rng(0);
  Sequential encoder = build_encoder(meta.encoder, rng);
  restore(encoder, "encoder", p, path);
  if (spec) *spec = meta.encoder;
  return encoder;
}

}  // namespace feasc
