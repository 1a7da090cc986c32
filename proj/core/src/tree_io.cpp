#include "freemesh/tree_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "freemesh/error.hpp"

namespace freemesh {

namespace {

// Deeper than any tree a finite half width can produce in practice.
constexpr std::size_t kMaxDepth = 256;

template <typename T>
T to_little_endian(T value) noexcept {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const T le = to_little_endian(value);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&le);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_point(const Point3& p) {
    for (double v : p) put(v);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw FormatError(std::string("truncated tree file reading ") + what, pos_);
    }
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little_endian(value);
  }
  Point3 get_point(const char* what) {
    Point3 p;
    for (double& v : p) v = get<double>(what);
    return p;
  }
  std::size_t position() const noexcept { return pos_; }
  bool at_end() const noexcept { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_node(Writer& w, const OctreeNode& node) {
  w.put_point(node.frame.center);
  w.put(node.frame.half_width);
  std::uint8_t mask = 0;
  for (std::size_t o = 0; o < 8; ++o)
    if (node.children[o]) mask |= static_cast<std::uint8_t>(1u << o);
  w.put(mask);
  w.put(node.point_count);
  w.put(node.residual_rms);
  for (double c : node.coeffs) w.put(c);
  for (const auto& child : node.children)
    if (child) write_node(w, *child);
}

struct ParseState {
  Reader reader;
  std::size_t rank;
  std::uint64_t declared_nodes;
  std::uint64_t nodes_read = 0;
  std::size_t max_depth = 0;
};

std::unique_ptr<OctreeNode> read_node(ParseState& s, std::size_t depth) {
  if (depth > kMaxDepth) throw FormatError("tree deeper than supported", s.reader.position());
  if (s.nodes_read == s.declared_nodes) {
    throw FormatError("more node records than the header declares", s.reader.position());
  }
  ++s.nodes_read;
  s.max_depth = std::max(s.max_depth, depth);

  auto node = std::make_unique<OctreeNode>();
  const std::size_t start = s.reader.position();
  node->frame.center = s.reader.get_point("node center");
  node->frame.half_width = s.reader.get<double>("node half width");
  const auto& c = node->frame.center;
  if (!(node->frame.half_width > 0.0) || !std::isfinite(node->frame.half_width) ||
      !std::isfinite(c[0]) || !std::isfinite(c[1]) || !std::isfinite(c[2])) {
    throw FormatError("invalid node frame", start);
  }
  const auto mask = s.reader.get<std::uint8_t>("child mask");
  node->point_count = s.reader.get<std::uint64_t>("point count");
  node->residual_rms = s.reader.get<double>("residual rms");
  node->coeffs.resize(s.rank);
  for (double& v : node->coeffs) v = s.reader.get<double>("coefficient");
  for (std::size_t o = 0; o < 8; ++o)
    if (mask & (1u << o)) node->children[o] = read_node(s, depth + 1);
  return node;
}

}  // namespace

std::vector<std::uint8_t> serialize(const FmtTree& tree) {
  if (!tree.root) throw PreconditionError("cannot serialize an empty tree");
  Writer w;
  for (char ch : kTreeMagic) w.put(static_cast<std::uint8_t>(ch));
  w.put(static_cast<std::uint8_t>(kTreeVersion));
  w.put(static_cast<std::uint32_t>(tree.basis.lmax()));
  w.put(static_cast<std::uint32_t>(tree.basis.rank()));
  w.put(tree.tau);
  w.put_point(tree.domain_lo);
  w.put_point(tree.domain_hi);
  w.put(static_cast<std::uint64_t>(tree.node_count));
  write_node(w, *tree.root);
  return w.take();
}

FmtTree deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  std::array<std::uint8_t, 4> magic{};
  for (auto& b : magic) b = r.get<std::uint8_t>("magic");
  if (!std::equal(std::begin(kTreeMagic), std::end(kTreeMagic), magic.begin())) {
    throw FormatError("not a tree file (bad magic)", 0);
  }
  if (magic[3] != static_cast<std::uint8_t>(kTreeVersion)) {
    throw VersionError(std::string("unsupported tree file version '") +
                       static_cast<char>(magic[3]) + "', expected '" + kTreeVersion + "'");
  }
  const auto lmax = r.get<std::uint32_t>("lmax");
  if (lmax > static_cast<std::uint32_t>(kMaxOrder)) {
    throw FormatError("lmax " + std::to_string(lmax) + " exceeds " + std::to_string(kMaxOrder), 4);
  }
  const auto rank = r.get<std::uint32_t>("rank");
  if (rank != rank_stride(static_cast<std::int64_t>(lmax) + 1)) {
    throw FormatError("rank does not match lmax", 8);
  }

  FmtTree tree;
  tree.basis = MomentBasis(static_cast<int>(lmax));
  tree.tau = r.get<double>("tau");
  if (!(tree.tau > 0.0)) throw FormatError("tau must be positive", 12);
  tree.domain_lo = r.get_point("domain_lo");
  tree.domain_hi = r.get_point("domain_hi");
  const std::size_t count_pos = r.position();
  const auto declared = r.get<std::uint64_t>("node count");
  if (declared == 0) throw FormatError("tree must contain at least one node", count_pos);

  ParseState state{r, rank, declared};
  tree.root = read_node(state, 0);
  if (state.nodes_read != declared) {
    throw FormatError("header declares " + std::to_string(declared) + " nodes, found " +
                          std::to_string(state.nodes_read),
                      state.reader.position());
  }
  if (!state.reader.at_end()) throw FormatError("trailing bytes after last node", state.reader.position());
  tree.node_count = static_cast<std::size_t>(declared);
  tree.max_depth = state.max_depth;
  return tree;
}

void write_tree_file(const std::filesystem::path& path, const FmtTree& tree) {
  const auto bytes = serialize(tree);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

FmtTree read_tree_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open tree file " + path.string(), 0);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace freemesh
