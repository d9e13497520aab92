#include <doctest.h>

#include <opencv2/imgcodecs.hpp>

#include "asymstereo/io.hpp"
#include "test_support.hpp"

using namespace asymstereo;
using namespace asymstereo::testing;

TEST_CASE("8-bit PNG values scale to [0,1] endpoints") {
    TempDir tmp("asx_imagecore_8bit");
    cv::Mat m(8, 8, CV_8UC1, cv::Scalar(0));
    m.at<std::uint8_t>(0, 0) = 255;
    cv::imwrite(tmp.file("a.png"), m);

    const Image img = load_image(tmp.file("a.png"));
    CHECK(img.at(0, 0, 0) == doctest::Approx(1.0));
    CHECK(img.at(0, 1, 1) == doctest::Approx(0.0));
}

TEST_CASE("16-bit PNG scales by 65535") {
    TempDir tmp("asx_imagecore_16bit");
    cv::Mat m(8, 8, CV_16UC1, cv::Scalar(32768));
    cv::imwrite(tmp.file("a.png"), m);

    const Image img = load_image(tmp.file("a.png"));
    CHECK(img.at(0, 3, 3) == doctest::Approx(32768.0 / 65535.0));
}

TEST_CASE("PNG round trip is exact at native bit depth") {
    TempDir tmp("asx_imagecore_roundtrip");
    Rng rng(5);
    for (int channels : {1, 3}) {
        Image img = random_image(12, 9, channels, rng);
        // snap to the 8-bit grid first; files cannot hold more
        img = from_u8(quantize_u8(img), 12, 9, channels);
        save_image(img, tmp.file("rt.png"));
        const Image back = load_image(tmp.file("rt.png"));
        REQUIRE(back.data.shape == img.data.shape);
        for (std::size_t i = 0; i < img.data.size(); ++i) CHECK(back.data.v[i] == img.data.v[i]);
    }
}

TEST_CASE("load_image rejects missing and tiny files") {
    TempDir tmp("asx_imagecore_errors");
    CHECK_THROWS_AS(load_image(tmp.file("nope.png")), std::runtime_error);
    cv::Mat tiny(4, 4, CV_8UC1, cv::Scalar(1));
    cv::imwrite(tmp.file("tiny.png"), tiny);
    CHECK_THROWS_AS(load_image(tmp.file("tiny.png")), std::runtime_error);
}

TEST_CASE("PGM and PPM load") {
    TempDir tmp("asx_imagecore_pnm");
    cv::Mat g(8, 8, CV_8UC1, cv::Scalar(128));
    cv::imwrite(tmp.file("g.pgm"), g);
    const Image img = load_image(tmp.file("g.pgm"));
    CHECK(img.channels() == 1);
    CHECK(img.at(0, 0, 0) == doctest::Approx(128.0 / 255.0));

    cv::Mat c(8, 8, CV_8UC3, cv::Scalar(10, 20, 30));  // BGR
    cv::imwrite(tmp.file("c.ppm"), c);
    const Image rgb = load_image(tmp.file("c.ppm"));
    CHECK(rgb.at(0, 0, 0) == doctest::Approx(30.0 / 255.0));  // R
    CHECK(rgb.at(2, 0, 0) == doctest::Approx(10.0 / 255.0));  // B
}

TEST_CASE("kitti uint16 disparity: value/256 and zero-invalid") {
    TempDir tmp("asx_imagecore_kitti");
    cv::Mat m(8, 8, CV_16UC1, cv::Scalar(0));
    m.at<std::uint16_t>(2, 3) = 512;
    cv::imwrite(tmp.file("d.png"), m);

    const DisparityMap d = load_disparity(tmp.file("d.png"), DisparityFormat::KittiPng16);
    CHECK(d.at(2, 3) == doctest::Approx(2.0));
    CHECK(d.is_valid(2, 3));
    CHECK_FALSE(d.is_valid(0, 0));
}

TEST_CASE("PFM round trip is bit exact on random rasters") {
    TempDir tmp("asx_imagecore_pfm");
    Rng rng(9);
    DisparityMap d(11, 7);
    // values on the float32 grid, exactly what the format stores
    for (auto& v : d.data.v) v = static_cast<float>(uniform(rng, -40.0, 120.0));

    save_disparity(d, tmp.file("d.pfm"));
    const DisparityMap back = load_disparity(tmp.file("d.pfm"), DisparityFormat::Pfm);
    REQUIRE(back.height() == 11);
    REQUIRE(back.width() == 7);
    double max_diff = 0;
    for (std::size_t i = 0; i < d.data.size(); ++i)
        max_diff = std::max(max_diff, std::abs(d.data.v[i] - back.data.v[i]));
    CHECK(max_diff == 0.0);
    for (std::size_t i = 0; i < d.valid.size(); ++i) CHECK(back.valid[i] == d.valid[i]);
}

TEST_CASE("PFM negative scale means bottom-up rows") {
    TempDir tmp("asx_imagecore_pfm_rows");
    DisparityMap d(3, 2);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 2; ++x) d.at(y, x) = y * 10 + x;
    save_disparity(d, tmp.file("d.pfm"));

    // the first data row in the file must be the bottom image row
    std::ifstream in(tmp.file("d.pfm"), std::ios::binary);
    std::string magic, dims1, dims2, scale;
    in >> magic >> dims1 >> dims2 >> scale;
    in.get();
    float first = 0;
    in.read(reinterpret_cast<char*>(&first), 4);
    CHECK(magic == "Pf");
    CHECK(std::stod(scale) < 0);
    CHECK(first == doctest::Approx(20.0));  // row y=2, x=0
}

TEST_CASE("PFM invalid pixels round trip through +inf") {
    TempDir tmp("asx_imagecore_pfm_invalid");
    DisparityMap d(8, 8);
    d.at(1, 1) = 5.0;
    d.set_valid(4, 4, false);
    save_disparity(d, tmp.file("d.pfm"));
    const DisparityMap back = load_disparity(tmp.file("d.pfm"), DisparityFormat::Pfm);
    CHECK(back.is_valid(1, 1));
    CHECK_FALSE(back.is_valid(4, 4));
}

TEST_CASE("render_disparity maps the range ends") {
    TempDir tmp("asx_imagecore_render");
    DisparityMap d(8, 8);
    for (auto& v : d.data.v) v = 32.0;  // top of range
    d.set_valid(0, 0, false);
    render_disparity(d, tmp.file("r.png"), 32.0);

    cv::Mat m = cv::imread(tmp.file("r.png"), cv::IMREAD_COLOR);
    REQUIRE(!m.empty());
    // uniform top-of-colormap everywhere except the invalid black pixel
    const cv::Vec3b top = m.at<cv::Vec3b>(4, 4);
    CHECK(m.at<cv::Vec3b>(7, 7) == top);
    CHECK(m.at<cv::Vec3b>(0, 0) == cv::Vec3b(0, 0, 0));
}

TEST_CASE("grayscale conversion uses BT.601 weights") {
    Image img(8, 8, 3);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
            img.at(0, y, x) = 1.0;
            img.at(1, y, x) = 0.5;
            img.at(2, y, x) = 0.25;
        }
    const Image g = to_grayscale(img);
    CHECK(g.at(0, 0, 0) == doctest::Approx(0.299 * 1.0 + 0.587 * 0.5 + 0.114 * 0.25));
}
