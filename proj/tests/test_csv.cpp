#include "capire/csv.hpp"
#include "capire/common.hpp"

#include <doctest.h>

#include <sstream>

using namespace capire;

TEST_CASE("rfc4180 basics") {
    std::istringstream in("a,b,c\n1,2,3\n4,,6\n");
    const csv::Table t = csv::read(in);
    CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][1] == "");
    CHECK(t.column("b") == 1);
    CHECK(t.column("zzz") == -1);
}

TEST_CASE("quoted fields with commas, quotes and newlines") {
    std::istringstream in("name,note\n\"Doe, J\",\"said \"\"hi\"\"\"\n\"multi\nline\",x\n");
    const csv::Table t = csv::read(in);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "Doe, J");
    CHECK(t.rows[0][1] == "said \"hi\"");
    CHECK(t.rows[1][0] == "multi\nline");
}

TEST_CASE("crlf and missing trailing newline") {
    std::istringstream in("a,b\r\n1,2\r\n3,4");
    const csv::Table t = csv::read(in);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[1][0] == "3");
}

TEST_CASE("structural problems raise IngestError") {
    std::istringstream bad_count("a,b\n1,2,3\n");
    CHECK_THROWS_AS(csv::read(bad_count), IngestError);
    std::istringstream bad_quote("a,b\n\"unterminated,2\n");
    CHECK_THROWS_AS(csv::read(bad_quote), IngestError);
    std::istringstream empty("");
    CHECK_THROWS_AS(csv::read(empty), IngestError);
    CHECK_THROWS_AS(csv::read_file("/nonexistent/file.csv"), IngestError);
}

TEST_CASE("write/read round trip") {
    csv::Table t;
    t.header = {"id", "text"};
    t.rows = {{"1", "plain"}, {"2", "a,b"}, {"3", "q\"q"}, {"4", ""}};
    std::ostringstream out;
    csv::write(out, t);
    std::istringstream in(out.str());
    const csv::Table back = csv::read(in);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
}
