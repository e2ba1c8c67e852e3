#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include <unistd.h>

#include "microsim/io.hpp"
#include "oracles.hpp"

using namespace microsim;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("microsim_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

} // namespace

TEST(Png, EightBitRoundTrip) {
  TempDir dir;
  RealImage img(13, 7);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i % 256) / 255.0;
  const auto p = (dir / "a.png").string();
  io::write_png(p, img, 8);
  const auto back = io::read_png(p);
  EXPECT_EQ(back.bit_depth, 8);
  ASSERT_TRUE(back.values.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.values[i], img[i], 1e-12);
}

TEST(Png, SixteenBitQuantization) {
  TempDir dir;
  std::mt19937_64 rng(60);
  const auto img = oracle::random_image(21, 17, rng);
  const auto p = (dir / "b.png").string();
  io::write_png(p, img, 16);
  const auto back = io::read_png(p);
  EXPECT_EQ(back.bit_depth, 16);
  for (std::size_t i = 0; i < img.size(); ++i)
    EXPECT_LE(std::abs(back.values[i] - img[i]), 0.5 / 65535.0 + 1e-15);
}

TEST(Png, OutOfRangeIsClamped) {
  TempDir dir;
  RealImage img(2, 1);
  img[0] = -0.5;
  img[1] = 1.7;
  const auto p = (dir / "c.png").string();
  io::write_png(p, img);
  const auto back = io::read_png(p).values;
  EXPECT_EQ(back[0], 0.0);
  EXPECT_EQ(back[1], 1.0);
}

TEST(Png, Errors) {
  TempDir dir;
  EXPECT_THROW(io::read_png((dir / "missing.png").string()), IoError);
  std::ofstream(dir / "junk.png") << "not a png";
  EXPECT_THROW(io::read_png((dir / "junk.png").string()), IoError);
  EXPECT_THROW(io::write_png((dir / "x.png").string(), RealImage(2, 2), 12), InvalidArgument);
}

TEST(Tiff, FloatRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(61);
  const auto d = oracle::random_image(19, 11, rng, -10e-6, 10e-6);
  const auto p = (dir / "d.tif").string();
  io::write_tiff_float(p, d);
  const auto back = io::load_depth(p);
  ASSERT_TRUE(back.same_shape(d));
  for (std::size_t i = 0; i < d.size(); ++i)
    EXPECT_EQ(back[i], static_cast<double>(static_cast<float>(d[i])));
}

TEST(DepthPng, SidecarMapping) {
  TempDir dir;
  RealImage v(4, 1);
  v[0] = 0.0;
  v[1] = 1.0;
  v[2] = 0.5;
  v[3] = 0.25;
  const auto p = (dir / "z.png").string();
  io::write_png(p, v, 16);
  std::ofstream(io::depth_sidecar_path(p)) << "min_depth = -10e-6\nmax_depth = 10e-6\n";
  const auto d = io::load_depth(p);
  EXPECT_NEAR(d[0], -10e-6, 1e-18);
  EXPECT_NEAR(d[1], 10e-6, 1e-18);
  EXPECT_NEAR(d[2], 0.0, 20e-6 / 65535.0);
  EXPECT_NEAR(d[3], -5e-6, 20e-6 / 65535.0);
}

TEST(DepthPng, Errors) {
  TempDir dir;
  const auto p8 = (dir / "z8.png").string();
  io::write_png(p8, RealImage(3, 3, 0.5), 8);
  std::ofstream(io::depth_sidecar_path(p8)) << "min_depth = 0\nmax_depth = 1e-6\n";
  EXPECT_THROW(io::load_depth(p8), IoError);

  const auto p16 = (dir / "z16.png").string();
  io::write_png(p16, RealImage(3, 3, 0.5), 16);
  EXPECT_THROW(io::load_depth(p16), IoError);
  std::ofstream(io::depth_sidecar_path(p16)) << "min_depth = 0\n";
  EXPECT_THROW(io::load_depth(p16), ParseError);
  std::ofstream(io::depth_sidecar_path(p16)) << "min_depth = 0\nmax_depth = 1\nscale = 2\n";
  EXPECT_THROW(io::load_depth(p16), ParseError);

  EXPECT_THROW(io::load_depth((dir / "none.tif").string()), IoError);
  std::ofstream(dir / "d.npy") << "x";
  EXPECT_THROW(io::load_depth((dir / "d.npy").string()), IoError);
}

TEST(Files, NaturalOrder) {
  EXPECT_TRUE(io::natural_less("f2.png", "f10.png"));
  EXPECT_FALSE(io::natural_less("f10.png", "f2.png"));
  EXPECT_TRUE(io::natural_less("a.png", "b.png"));
  EXPECT_TRUE(io::natural_less("frame", "frame1"));
  EXPECT_TRUE(io::natural_less("f01", "f2"));
  EXPECT_FALSE(io::natural_less("same", "same"));

  TempDir dir;
  for (const char* n : {"f10.png", "f2.png", "f1.png", "notes.txt", "f3.PNG"})
    std::ofstream(dir / n) << "x";
  fs::create_directories(dir / "sub.png");
  const auto files = io::list_files(dir.path(), {".png"});
  std::vector<std::string> names;
  for (const auto& f : files) names.push_back(f.filename().string());
  EXPECT_EQ(names, (std::vector<std::string>{"f1.png", "f2.png", "f3.PNG", "f10.png"}));
  EXPECT_THROW(io::list_files(dir / "missing", {".png"}), IoError);
}
