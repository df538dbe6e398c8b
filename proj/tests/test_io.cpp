#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <unistd.h>

#include "grassmann/io.hpp"
#include "support.hpp"

using namespace grassmann;
using namespace testsupport;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("grassmann_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace

TEST(MatrixCsv, RoundTripsExactly) {
  Rng rng(141);
  TempDir dir;
  Matrix m = gaussian(5, 3, rng);
  m(0, 0) = 1e-300;
  m(1, 1) = -0.1;
  io::write_matrix(dir.path() / "m.csv", m);
  EXPECT_EQ(io::read_matrix(dir.path() / "m.csv"), m);
  EXPECT_FALSE(fs::exists(dir.path() / "m.csv.tmp"));
}

TEST(MatrixCsv, RejectsMalformed) {
  TempDir dir;
  write_file(dir.path() / "ragged.csv", "1,2\n3\n");
  write_file(dir.path() / "text.csv", "1,abc\n");
  write_file(dir.path() / "empty.csv", "\n");
  for (const char* name : {"ragged.csv", "text.csv", "empty.csv"}) {
    try {
      io::read_matrix(dir.path() / name);
      FAIL() << name;
    } catch (const Error& e) {
      EXPECT_TRUE(e.is_validation()) << name;
    }
  }
  EXPECT_THROW(io::read_matrix(dir.path() / "missing.csv"), Error);
}

TEST(SubspaceFile, ValidatesAndReorthonormalizes) {
  Rng rng(142);
  TempDir dir;
  const auto x = gs_point(6, 2, rng);
  io::write_matrix(dir.path() / "near.csv", x.basis() + 1e-8 * gaussian(6, 2, rng));
  const auto loaded = io::read_subspace(dir.path() / "near.csv");
  EXPECT_LE(chordal_distance(loaded, x), 1e-7);
  io::write_matrix(dir.path() / "bad.csv", 2.0 * x.basis());
  EXPECT_THROW(io::read_subspace(dir.path() / "bad.csv"), Error);
}

TEST(KeyValues, ParseAndFormat) {
  const auto kv = io::parse_key_values("# comment\n[section]\na = 1\n b=two words \n\n", "cfg");
  EXPECT_EQ(kv.at("a"), "1");
  EXPECT_EQ(kv.at("b"), "two words");
  EXPECT_THROW(io::parse_key_values("novalue\n", "cfg"), Error);
  EXPECT_EQ(io::parse_key_values(io::key_values_to_text(kv), "cfg"), kv);
}

TEST(Hash, FnvKnownValues) {
  EXPECT_EQ(io::fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(io::fnv1a_hex("a"), "af63dc4c8601ec8c");
}

TEST(Manifest, ParseResolveAndRoundTrip) {
  TempDir dir;
  fs::create_directories(dir.path() / "sets");
  write_file(dir.path() / "sets" / "a.csv", "1,0\n0,1\n0,0\n");
  write_file(dir.path() / "b.csv", "0,0\n1,0\n0,1\n");
  write_file(dir.path() / "index.txt",
             "kind=subspace\nd=3\n# entries\nid,path,label,split\na,sets/a.csv,0,train\nb,b.csv,1,test\n");
  const auto m = io::read_manifest(dir.path() / "index.txt");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.kind(), "subspace");
  EXPECT_EQ(m.select("test").size(), 1u);
  const auto set = io::load_subspaces(m, "train");
  ASSERT_EQ(set.points.size(), 1u);
  EXPECT_EQ(set.ids[0], "a");
  EXPECT_EQ(io::parse_manifest(io::manifest_to_text(m), dir.path(), "x").entries[1].path, fs::path("b.csv"));
}

TEST(Manifest, ErrorsNameTheEntry) {
  TempDir dir;
  write_file(dir.path() / "index.txt", "kind=samples\nid,path,label,split\nghost,nowhere.csv,0,train\n");
  try {
    io::read_manifest(dir.path() / "index.txt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.is_validation());
    EXPECT_NE(std::string(e.what()).find("ghost"), std::string::npos);
  }
  EXPECT_THROW(io::parse_manifest("id,path,label,split\na,x,,train\n", dir.path(), "m"), Error);
  EXPECT_THROW(io::parse_manifest("id,path,label,split\na,x,0,train\na,y,1,train\n", dir.path(), "m"), Error);
  EXPECT_THROW(io::parse_manifest("kind=video\nid,path,label,split\n", dir.path(), "m"), Error);
  EXPECT_THROW(io::parse_manifest("kind=samples\n", dir.path(), "m"), Error);
}

TEST(DictionaryDir, GrassmannRoundTrip) {
  Rng rng(143);
  TempDir dir;
  const GrassmannDictionary dict(random_points(3, 6, 2, rng), {0, 1, 1});
  io::save_dictionary(dir.path() / "dict", dict, "gsc");
  const auto meta = io::read_meta(dir.path() / "dict");
  EXPECT_EQ(meta.kind, "grassmann");
  EXPECT_EQ(meta.atoms, 3u);
  const auto loaded = io::load_grassmann_dictionary(dir.path() / "dict");
  EXPECT_EQ(loaded.labels(), dict.labels());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LE(chordal_distance(loaded.atom(i), dict.atom(i)), 1e-12);
  EXPECT_THROW(io::load_kernel_dictionary(dir.path() / "dict"), Error);
}

TEST(DictionaryDir, KernelRoundTrip) {
  Rng rng(144);
  TempDir dir;
  const auto k = KernelFunction::gaussian(0.25);
  std::vector<KernelSubspace> atoms;
  for (int i = 0; i < 3; ++i) atoms.push_back(gram_basis(gaussian(4, 5, rng), 2, k));
  const KernelDictionary dict(atoms);
  io::save_dictionary(dir.path() / "kdict", dict, "kgsc");
  const auto loaded = io::load_kernel_dictionary(dir.path() / "kdict");
  EXPECT_EQ(loaded.kernel(), k);
  EXPECT_EQ(loaded.gram().similarity(), dict.gram().similarity());
}
