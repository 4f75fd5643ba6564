#include "speedbias/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "speedbias/errors.hpp"
#include "speedbias/quantize.hpp"

namespace speedbias::nmt {
namespace {

constexpr char kMagic[8] = {'S', 'B', 'C', 'K', 'P', 'T', '0', '1'};

std::uint64_t fnv1a(const unsigned char* data, std::size_t n,
                    std::uint64_t h = 1469598103934665603ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::string weights_digest(const Params& params) {
  return hex64(fnv1a(reinterpret_cast<const unsigned char*>(params.flat.data()),
                     sizeof(double) * params.flat.size()));
}

void save_checkpoint(const std::filesystem::path& file, const Params& params,
                     bool quantized) {
  nlohmann::ordered_json header;
  header["format_version"] = 1;
  header["config"] = params.config.to_json();
  header["config_hash"] = params.config.hash();
  header["quantized"] = quantized;
  nlohmann::ordered_json tensors = nlohmann::ordered_json::array();

  std::string payload;
  for (const TensorInfo& t : params.layout.tensors()) {
    nlohmann::ordered_json tj;
    tj["name"] = t.name;
    tj["rows"] = t.rows;
    tj["cols"] = t.cols;
    if (quantized && is_quantizable(t.name)) {
      QuantizedTensor q = quantize_tensor(params.tensor(t.name));
      tj["dtype"] = "i8";
      tj["scale"] = q.scale;
      payload.append(reinterpret_cast<const char*>(q.values.data()),
                     q.values.size());
    } else {
      tj["dtype"] = "f64";
      payload.append(
          reinterpret_cast<const char*>(params.flat.data() + t.offset),
          sizeof(double) * t.size());
    }
    tensors.push_back(std::move(tj));
  }
  header["tensors"] = std::move(tensors);
  std::string header_s = header.dump();

  std::filesystem::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RunError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof kMagic);
    std::uint64_t len = header_s.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(header_s.data(), static_cast<std::streamsize>(header_s.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw RunError("short write on checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& file,
                                 const std::optional<ModelConfig>& expected) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + file.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw DataError(file.string() + ": not a checkpoint file");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len == 0 || len > (1ULL << 24))
    throw DataError(file.string() + ": corrupt header length");
  std::string header_s(len, '\0');
  in.read(header_s.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(file.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_s);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(file.string() + ": bad header: " + e.what());
  }

  LoadedCheckpoint out;
  out.info.quantized = header.at("quantized").get<bool>();
  out.info.config_hash = header.at("config_hash").get<std::string>();
  ModelConfig config = ModelConfig::from_json(header.at("config"));
  if (config.hash() != out.info.config_hash)
    throw DataError(file.string() + ": config hash mismatch (corrupt header)");
  if (expected && expected->hash() != out.info.config_hash)
    throw DataError(file.string() + ": checkpoint config does not match (" +
                    out.info.config_hash + " vs " + expected->hash() + ")");

  out.params.config = config;
  out.params.layout = ParamLayout(config);
  out.params.flat = Vec::Zero(out.params.layout.total_size());

  const auto& tensors = header.at("tensors");
  if (tensors.size() != out.params.layout.tensors().size())
    throw DataError(file.string() + ": tensor table size mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const TensorInfo& t = out.params.layout.tensors()[i];
    const auto& tj = tensors.at(i);
    if (tj.at("name").get<std::string>() != t.name ||
        tj.at("rows").get<int>() != t.rows || tj.at("cols").get<int>() != t.cols)
      throw DataError(file.string() + ": tensor table mismatch at " + t.name);
    std::string dtype = tj.at("dtype").get<std::string>();
    if (dtype == "f64") {
      in.read(reinterpret_cast<char*>(out.params.flat.data() + t.offset),
              static_cast<std::streamsize>(sizeof(double) * t.size()));
      if (!in) throw DataError(file.string() + ": truncated payload at " + t.name);
    } else if (dtype == "i8") {
      QuantizedTensor q;
      q.rows = t.rows;
      q.cols = t.cols;
      q.scale = tj.at("scale").get<double>();
      q.values.resize(static_cast<std::size_t>(t.size()));
      in.read(reinterpret_cast<char*>(q.values.data()),
              static_cast<std::streamsize>(q.values.size()));
      if (!in) throw DataError(file.string() + ": truncated payload at " + t.name);
      out.params.tensor(t.name) = dequantize_tensor(q);
    } else {
      throw DataError(file.string() + ": unknown dtype " + dtype);
    }
  }
  return out;
}

}  // namespace speedbias::nmt
