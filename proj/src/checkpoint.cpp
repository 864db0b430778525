#include "coag/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace coag {

namespace {
constexpr const char* kMagic = "COAGSIM-CHECKPOINT 1";
}

void write_checkpoint(const std::filesystem::path& path, const PopulationState& state, const nlohmann::json& config) {
  const LatticeIndex& lat = state.lattice();
  nlohmann::json header = {
      {"dimension", lat.dimension()},
      {"n_max", lat.n_max()},
      {"time", state.time()},
      {"ordering_version", LatticeIndex::kOrderingVersion},
      {"count", lat.count()},
      {"config", config},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path.string());
  out << kMagic << '\n' << text.size() << '\n' << text;
  out.write(reinterpret_cast<const char*>(state.concentrations().data()),
            static_cast<std::streamsize>(sizeof(double) * lat.count()));
  if (!out) throw CheckpointError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::string magic, length;
  std::getline(in, magic);
  if (magic != kMagic) throw CheckpointError("not a checkpoint file: " + path.string());
  std::getline(in, length);
  std::size_t bytes = 0;
  try {
    bytes = std::stoul(length);
  } catch (const std::exception&) {
    throw CheckpointError("corrupt checkpoint header length");
  }
  std::string text(bytes, '\0');
  in.read(text.data(), static_cast<std::streamsize>(bytes));
  if (!in) throw CheckpointError("truncated checkpoint header");
  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const int version = ck.header.at("ordering_version").get<int>();
  if (version != LatticeIndex::kOrderingVersion)
    throw CheckpointError("checkpoint ordering version " + std::to_string(version) + " does not match " +
                          std::to_string(LatticeIndex::kOrderingVersion));
  auto lattice = enumerate(ck.header.at("dimension").get<int>(), ck.header.at("n_max").get<int>());
  if (lattice->count() != ck.header.at("count").get<Index>()) throw CheckpointError("checkpoint count mismatch");
  Eigen::ArrayXd n(lattice->count());
  in.read(reinterpret_cast<char*>(n.data()), static_cast<std::streamsize>(sizeof(double) * n.size()));
  if (!in) throw CheckpointError("truncated checkpoint data");
  ck.state = PopulationState(lattice, std::move(n), ck.header.at("time").get<double>());
  return ck;
}

void write_state_csv(const std::filesystem::path& path, const PopulationState& state, const nlohmann::json& config) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string());
  const LatticeIndex& lat = state.lattice();
  out << "# config: " << config.dump() << '\n';
  out << "size";
  for (int j = 1; j <= lat.dimension(); ++j) out << ",alpha_" << j;
  out << ",n\n";
  out.precision(17);
  for (Index i = 0; i < lat.count(); ++i) {
    out << lat.size_of(i);
    for (int j = 0; j < lat.dimension(); ++j) out << ',' << lat.point(i)[j];
    out << ',' << state[i] << '\n';
  }
}

}  // namespace coag
