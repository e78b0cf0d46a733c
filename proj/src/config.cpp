#include "vidrec/config.hpp"

#include <algorithm>
#include <iterator>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace vidrec {

using nlohmann::json;

SynthSpec SynthDataConfig::train_spec(std::uint64_t seed) const {
  return {verbs, nouns, train_per_class, seed, height, width, object_size, noise};
}

SynthSpec SynthDataConfig::test_spec(std::uint64_t seed) const {
  return {verbs, nouns, test_per_class, seed ^ 0x5bd1e995ULL, height, width, object_size, noise};
}

namespace {

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  for (const auto& item : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; }) == allowed.end()) {
      throw std::invalid_argument("config: unknown key '" + where + "." + item.key() + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_train(const json& obj, const std::string& where, TrainSpec& spec) {
  check_keys(obj, where, {"base_lr", "momentum", "batch", "epochs", "warmup_epochs"});
  read(obj, "base_lr", spec.base_lr);
  read(obj, "momentum", spec.momentum);
  read(obj, "batch", spec.batch);
  read(obj, "epochs", spec.epochs);
  read(obj, "warmup_epochs", spec.warmup_epochs);
}

json train_json(const TrainSpec& s) {
  return {{"base_lr", s.base_lr}, {"momentum", s.momentum}, {"batch", s.batch}, {"epochs", s.epochs},
          {"warmup_epochs", s.warmup_epochs}};
}

}  // namespace

HarnessConfig HarnessConfig::toy_default() {
  HarnessConfig cfg;
  cfg.finalize();
  return cfg;
}

void HarnessConfig::finalize() {
  const ClassCounts classes{data.verbs, data.nouns, data.verbs * data.nouns};
  xvit.frames = gsf.frames = sampling.frames;
  xvit.input_h = xvit.input_w = gsf.input_h = gsf.input_w = views.crop_side;
  xvit.classes = gsf.classes = classes;
  xvit.validate();
  gsf.validate();
  gsf_train.validate();
  xvit_train.validate();
  if (sampling.frames < 1) throw std::invalid_argument("config: sampling.frames must be >= 1");
  if (views.clips_per_video < 1 || views.crops_per_frame != 3) {
    throw std::invalid_argument("config: views need clips >= 1 and exactly 3 crops");
  }
  if (views.crop_side > std::min(data.height, data.width)) {
    throw std::invalid_argument("config: crop_side exceeds the synthetic frame");
  }
  if (members.empty()) throw std::invalid_argument("config: ensemble.members is empty");
  for (const std::string& m : members) {
    if (m != "gsf" && m != "xvit") throw std::invalid_argument("config: unknown ensemble member '" + m + "'");
  }
  if (std::set<std::string>(members.begin(), members.end()).size() != members.size()) {
    throw std::invalid_argument("config: duplicate ensemble member");
  }
  data.train_spec(0).validate();
}

HarnessConfig HarnessConfig::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  HarnessConfig cfg;
  try {
    check_keys(root, "<root>", {"model", "sampling", "views", "train", "ensemble"});
    if (root.contains("model")) {
      const json& m = root.at("model");
      check_keys(m, "model", {"xvit", "gsf"});
      if (m.contains("xvit")) {
        const json& x = m.at("xvit");
        check_keys(x, "model.xvit", {"layers", "heads", "embed_dim", "patch", "t_w", "mlp_ratio"});
        read(x, "layers", cfg.xvit.layers);
        read(x, "heads", cfg.xvit.heads);
        read(x, "embed_dim", cfg.xvit.embed_dim);
        read(x, "patch", cfg.xvit.patch);
        read(x, "t_w", cfg.xvit.t_w);
        read(x, "mlp_ratio", cfg.xvit.mlp_ratio);
      }
      if (m.contains("gsf")) {
        const json& g = m.at("gsf");
        check_keys(g, "model.gsf", {"widths", "fusion"});
        read(g, "widths", cfg.gsf.widths);
        if (g.contains("fusion")) cfg.gsf.fusion = parse_fusion(g.at("fusion").get<std::string>());
      }
    }
    if (root.contains("sampling")) {
      const json& s = root.at("sampling");
      check_keys(s, "sampling", {"frames"});
      read(s, "frames", cfg.sampling.frames);
    }
    if (root.contains("views")) {
      const json& v = root.at("views");
      check_keys(v, "views", {"clips", "crops", "crop_side"});
      read(v, "clips", cfg.views.clips_per_video);
      read(v, "crops", cfg.views.crops_per_frame);
      read(v, "crop_side", cfg.views.crop_side);
    }
    if (root.contains("train")) {
      const json& t = root.at("train");
      check_keys(t, "train", {"gsf", "xvit", "data"});
      if (t.contains("gsf")) read_train(t.at("gsf"), "train.gsf", cfg.gsf_train);
      if (t.contains("xvit")) read_train(t.at("xvit"), "train.xvit", cfg.xvit_train);
      if (t.contains("data")) {
        const json& d = t.at("data");
        check_keys(d, "train.data",
                   {"verbs", "nouns", "train_per_class", "test_per_class", "height", "width", "object_size", "noise"});
        read(d, "verbs", cfg.data.verbs);
        read(d, "nouns", cfg.data.nouns);
        read(d, "train_per_class", cfg.data.train_per_class);
        read(d, "test_per_class", cfg.data.test_per_class);
        read(d, "height", cfg.data.height);
        read(d, "width", cfg.data.width);
        read(d, "object_size", cfg.data.object_size);
        read(d, "noise", cfg.data.noise);
      }
    }
    if (root.contains("ensemble")) {
      const json& e = root.at("ensemble");
      check_keys(e, "ensemble", {"members"});
      read(e, "members", cfg.members);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: bad value: ") + e.what());
  }
  cfg.finalize();
  return cfg;
}

HarnessConfig HarnessConfig::load(std::istream& in) {
  return from_json_text(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
}

std::string HarnessConfig::to_json_text() const {
  const json root = {
      {"model",
       {{"xvit",
         {{"layers", xvit.layers},
          {"heads", xvit.heads},
          {"embed_dim", xvit.embed_dim},
          {"patch", xvit.patch},
          {"t_w", xvit.t_w},
          {"mlp_ratio", xvit.mlp_ratio}}},
        {"gsf", {{"widths", gsf.widths}, {"fusion", fusion_name(gsf.fusion)}}}}},
      {"sampling", {{"frames", sampling.frames}}},
      {"views", {{"clips", views.clips_per_video}, {"crops", views.crops_per_frame}, {"crop_side", views.crop_side}}},
      {"train",
       {{"gsf", train_json(gsf_train)},
        {"xvit", train_json(xvit_train)},
        {"data",
         {{"verbs", data.verbs},
          {"nouns", data.nouns},
          {"train_per_class", data.train_per_class},
          {"test_per_class", data.test_per_class},
          {"height", data.height},
          {"width", data.width},
          {"object_size", data.object_size},
          {"noise", data.noise}}}}},
      {"ensemble", {{"members", members}}}};
  return root.dump(2) + "\n";
}

}  // namespace vidrec
