#include "infestscope/detections.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

namespace fs = std::filesystem;
using namespace infestscope;

namespace {

fs::path temp_dir() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "infestscope_detections_test";
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

fs::path write_file(const char* name, const std::string& content) {
    const fs::path p = temp_dir() / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// IoU
// ---------------------------------------------------------------------------

TEST(Iou, IdenticalBoxesGiveOne) {
    const Box b{3, 4, 10, 12};
    EXPECT_DOUBLE_EQ(iou(b, b), 1.0);
}

TEST(Iou, DisjointBoxesGiveZero) {
    EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {2, 2, 3, 3}), 0.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 1, 1}, {1, 0, 2, 1}), 0.0);  // touching edges
}

TEST(Iou, OneSeventhOverlap) {
    // inter 1, union 4 + 4 - 1 = 7
    EXPECT_NEAR(iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0, 1e-15);
}

TEST(Iou, SymmetricTranslationInvariantAndBounded) {
    std::mt19937 rng(41);
    std::uniform_real_distribution<double> coord(0.0, 50.0), size(0.5, 20.0), shift(-30.0, 30.0);
    for (int i = 0; i < 500; ++i) {
        const Box a{coord(rng), coord(rng), 0, 0};
        const Box b{coord(rng), coord(rng), 0, 0};
        Box aa{a.x_min, a.y_min, a.x_min + size(rng), a.y_min + size(rng)};
        Box bb{b.x_min, b.y_min, b.x_min + size(rng), b.y_min + size(rng)};
        const double v = iou(aa, bb);
        EXPECT_DOUBLE_EQ(v, iou(bb, aa));
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        EXPECT_DOUBLE_EQ(iou(aa, aa), 1.0);

        const double tx = shift(rng), ty = shift(rng);
        const Box at{aa.x_min + tx, aa.y_min + ty, aa.x_max + tx, aa.y_max + ty};
        const Box bt{bb.x_min + tx, bb.y_min + ty, bb.x_max + tx, bb.y_max + ty};
        EXPECT_NEAR(iou(at, bt), v, 1e-12);
    }
}

// ---------------------------------------------------------------------------
// to_points
// ---------------------------------------------------------------------------

TEST(ToPoints, CenterAndArea) {
    const std::vector<Annotation> anns = {{"img", {0, 0, 10, 10}, TreeClass::Healthy},
                                          {"img", {2, 4, 6, 8}, TreeClass::Infected}};
    const auto pts = to_points(anns);
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_DOUBLE_EQ(pts[0].x, 5.0);
    EXPECT_DOUBLE_EQ(pts[0].y, 5.0);
    EXPECT_DOUBLE_EQ(pts[0].area, 100.0);
    EXPECT_EQ(pts[0].cls, TreeClass::Healthy);
    EXPECT_DOUBLE_EQ(pts[1].x, 4.0);
    EXPECT_DOUBLE_EQ(pts[1].y, 6.0);
    EXPECT_DOUBLE_EQ(pts[1].area, 16.0);
}

TEST(ToPoints, EmptyListGivesEmptyList) {
    EXPECT_TRUE(to_points(std::vector<Annotation>{}).empty());
    EXPECT_TRUE(to_points(std::vector<Detection>{}).empty());
}

// ---------------------------------------------------------------------------
// Pascal-VOC XML
// ---------------------------------------------------------------------------

TEST(VocXml, ParsesSingleObject) {
    const auto p = write_file("one.xml", R"(<annotation>
  <folder>plots</folder>
  <filename>plot1_tile3.jpg</filename>
  <size><width>1024</width><height>1024</height><depth>3</depth></size>
  <object>
    <name>infected</name>
    <pose>Unspecified</pose>
    <bndbox><xmin>10</xmin><ymin>20</ymin><xmax>30</xmax><ymax>40</ymax></bndbox>
  </object>
</annotation>)");
    const auto anns = load_voc_xml(p);
    ASSERT_EQ(anns.size(), 1u);
    EXPECT_EQ(anns[0].cls, TreeClass::Infected);
    EXPECT_EQ(anns[0].image_id, "plot1_tile3");
    EXPECT_DOUBLE_EQ(anns[0].box.x_min, 10.0);
    EXPECT_DOUBLE_EQ(anns[0].box.y_min, 20.0);
    EXPECT_DOUBLE_EQ(anns[0].box.x_max, 30.0);
    EXPECT_DOUBLE_EQ(anns[0].box.y_max, 40.0);
}

TEST(VocXml, ClassSynonymsAreCaseInsensitive) {
    const auto p = write_file("syn.xml", R"(<annotation><filename>a.jpg</filename>
<object><name>Dead</name><bndbox><xmin>1</xmin><ymin>1</ymin><xmax>2</xmax><ymax>2</ymax></bndbox></object>
<object><name>NORMAL</name><bndbox><xmin>3</xmin><ymin>3</ymin><xmax>4</xmax><ymax>4</ymax></bndbox></object>
<object><name>disease</name><bndbox><xmin>5</xmin><ymin>5</ymin><xmax>6</xmax><ymax>6</ymax></bndbox></object>
</annotation>)");
    const auto anns = load_voc_xml(p);
    ASSERT_EQ(anns.size(), 3u);
    EXPECT_EQ(anns[0].cls, TreeClass::Infected);
    EXPECT_EQ(anns[1].cls, TreeClass::Healthy);
    EXPECT_EQ(anns[2].cls, TreeClass::Infected);
}

TEST(VocXml, EmptyAnnotationGivesEmptyList) {
    const auto p = write_file("empty.xml", "<annotation><filename>x.jpg</filename></annotation>");
    EXPECT_TRUE(load_voc_xml(p).empty());
}

TEST(VocXml, UnknownClassNamesTheLabelAndLine) {
    const auto p = write_file("shrub.xml", R"(<annotation><filename>x.jpg</filename>
<object>
  <name>shrub</name>
  <bndbox><xmin>1</xmin><ymin>1</ymin><xmax>2</xmax><ymax>2</ymax></bndbox>
</object></annotation>)");
    try {
        load_voc_xml(p);
        FAIL() << "expected an error";
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("shrub"), std::string::npos) << msg;
        EXPECT_NE(msg.find(":2"), std::string::npos) << msg;  // <object> opens on line 2
    }
}

TEST(VocXml, RejectsMalformedXml) {
    const auto p1 = write_file("noclose.xml",
                               "<annotation><object><name>infected</name>");
    EXPECT_THROW(load_voc_xml(p1), std::runtime_error);
    const auto p2 = write_file("noroot.xml", "just some text");
    EXPECT_THROW(load_voc_xml(p2), std::runtime_error);
    const auto p3 = write_file("nobox.xml",
                               "<annotation><object><name>infected</name></object></annotation>");
    EXPECT_THROW(load_voc_xml(p3), std::runtime_error);
}

TEST(VocXml, RejectsInvertedBox) {
    const auto p = write_file("inv.xml", R"(<annotation>
<object><name>healthy</name><bndbox><xmin>30</xmin><ymin>1</ymin><xmax>10</xmax><ymax>2</ymax></bndbox></object>
</annotation>)");
    EXPECT_THROW(load_voc_xml(p), std::runtime_error);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

TEST(Csv, ParsesDetectionRow) {
    const auto p = write_file("dets.csv",
                              "image_id,class,score,x_min,y_min,x_max,y_max\n"
                              "img1,infected,0.93,5,5,50,60\n");
    const auto dets = load_detections_csv(p);
    ASSERT_EQ(dets.size(), 1u);
    EXPECT_EQ(dets[0].image_id, "img1");
    EXPECT_EQ(dets[0].cls, TreeClass::Infected);
    EXPECT_DOUBLE_EQ(dets[0].score, 0.93);
    EXPECT_DOUBLE_EQ(dets[0].box.x_max, 50.0);
}

TEST(Csv, HeaderOnlyGivesEmptyList) {
    const auto p = write_file("hdr.csv", "image_id,class,score,x_min,y_min,x_max,y_max\n");
    EXPECT_TRUE(load_detections_csv(p).empty());
    const auto p2 = write_file("hdr2.csv", "image_id,class,x_min,y_min,x_max,y_max\n");
    EXPECT_TRUE(load_annotations_csv(p2).empty());
}

TEST(Csv, RejectsScoreOutOfRange) {
    const auto p = write_file("badscore.csv",
                              "image_id,class,score,x_min,y_min,x_max,y_max\n"
                              "img1,healthy,1.5,0,0,1,1\n");
    EXPECT_THROW(load_detections_csv(p), std::runtime_error);
}

TEST(Csv, RejectsMissingColumnAndBadNumbers) {
    const auto p1 = write_file("short.csv",
                               "image_id,class,score,x_min,y_min,x_max,y_max\n"
                               "img1,healthy,0.5,0,0,1\n");
    EXPECT_THROW(load_detections_csv(p1), std::runtime_error);

    const auto p2 = write_file("alpha.csv",
                               "image_id,class,score,x_min,y_min,x_max,y_max\n"
                               "img1,healthy,0.5,zero,0,1,1\n");
    EXPECT_THROW(load_detections_csv(p2), std::runtime_error);

    const auto p3 = write_file("wrongheader.csv", "id,cls,score,x0,y0,x1,y1\nimg,healthy,1,0,0,1,1\n");
    EXPECT_THROW(load_detections_csv(p3), std::runtime_error);

    const auto p4 = write_file("badclass.csv",
                               "image_id,class,score,x_min,y_min,x_max,y_max\n"
                               "img1,oak,0.5,0,0,1,1\n");
    EXPECT_THROW(load_detections_csv(p4), std::runtime_error);
}

TEST(Csv, RoundTripPreservesEveryField) {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> coord(-100.0, 1000.0), size(1e-3, 500.0),
        score(0.0, 1.0);
    std::vector<Detection> dets;
    for (int i = 0; i < 200; ++i) {
        const double x = coord(rng), y = coord(rng);
        dets.push_back({"img" + std::to_string(i % 7),
                        {x, y, x + size(rng), y + size(rng)},
                        i % 3 == 0 ? TreeClass::Healthy : TreeClass::Infected,
                        score(rng)});
    }
    const fs::path p = temp_dir() / "roundtrip.csv";
    save_detections_csv(dets, p);
    const auto back = load_detections_csv(p);
    ASSERT_EQ(back.size(), dets.size());
    for (std::size_t i = 0; i < dets.size(); ++i) {
        EXPECT_EQ(back[i].image_id, dets[i].image_id);
        EXPECT_EQ(back[i].cls, dets[i].cls);
        EXPECT_EQ(back[i].score, dets[i].score);  // bit-exact
        EXPECT_EQ(back[i].box.x_min, dets[i].box.x_min);
        EXPECT_EQ(back[i].box.y_min, dets[i].box.y_min);
        EXPECT_EQ(back[i].box.x_max, dets[i].box.x_max);
        EXPECT_EQ(back[i].box.y_max, dets[i].box.y_max);
    }
}

TEST(Csv, RowOrderPreserved) {
    const auto p = write_file("order.csv",
                              "image_id,class,x_min,y_min,x_max,y_max\n"
                              "b,healthy,0,0,1,1\n"
                              "a,infected,1,1,2,2\n");
    const auto anns = load_annotations_csv(p);
    ASSERT_EQ(anns.size(), 2u);
    EXPECT_EQ(anns[0].image_id, "b");
    EXPECT_EQ(anns[1].image_id, "a");
}
