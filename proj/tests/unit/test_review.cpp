#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "labelrefine/errors.hpp"
#include "labelrefine/review.hpp"

using namespace labelrefine;
using namespace std::chrono_literals;

namespace {

ReviewRequest request() {
    ReviewRequest r;
    r.run_id = "r";
    r.current.body = "old";
    r.proposal.new_body = "new";
    r.proposal.changelog = "tighten";
    r.proposal.reasoning = "because";
    r.diff = "-old\n+new\n";
    return r;
}

ReviewOutcome cli(const std::string& input, std::string* printed = nullptr) {
    std::istringstream in(input);
    std::ostringstream out;
    CliReview gate(in, out);
    ReviewOutcome o = gate.decide(request());
    if (printed) *printed = out.str();
    return o;
}

}  // namespace

TEST(CliReview, Commands) {
    std::string printed;
    EXPECT_EQ(cli("a looks right\n", &printed).decision, Decision::approved);
    EXPECT_NE(printed.find("+new"), std::string::npos);
    EXPECT_NE(printed.find("because"), std::string::npos);

    const ReviewOutcome v = cli("veto\nv too broad\n");  // note required: re-prompted
    EXPECT_EQ(v.decision, Decision::vetoed);
    EXPECT_EQ(v.note, "too broad");

    const ReviewOutcome q = cli("q\n");
    EXPECT_EQ(q.decision, Decision::vetoed);
    EXPECT_TRUE(q.stop_run);

    EXPECT_TRUE(cli("").stop_run);  // EOF
}

TEST(CliReview, EditReadsFile) {
    const auto dir = fixtures::temp_dir("review-edit");
    std::ofstream(dir / "empty.md") << "";
    std::ofstream(dir / "p.md") << "edited prompt\n";
    const ReviewOutcome o = cli("e " + (dir / "empty.md").string() + "\ne " + (dir / "p.md").string() + "\n");
    EXPECT_EQ(o.decision, Decision::edited);
    EXPECT_EQ(o.edited_body, "edited prompt\n");
}

TEST(DecisionBoard, ResolveExactlyOnce) {
    DecisionBoard board;
    EXPECT_THROW(board.resolve("r", {"approve"}), NotFound);
    const auto id = board.publish({0, "r", 0, 0, "diff", "c", "why", "t", "intent", {}});
    EXPECT_THROW(board.publish({0, "r", 1, 0, "diff", "c", "why", "t", "intent", {}}), Conflict);
    ASSERT_TRUE(board.pending("r"));
    EXPECT_EQ(board.pending("r")->id, id);
    EXPECT_THROW(board.resolve("r", {"bogus"}), InvalidArgument);
    EXPECT_THROW(board.resolve("r", {"veto", ""}), InvalidArgument);
    DecisionInput stale{"approve"};
    stale.pending_id = id + 1;
    EXPECT_THROW(board.resolve("r", stale), Conflict);
    board.resolve("r", {"approve", "ok"});
    EXPECT_THROW(board.resolve("r", {"approve"}), Conflict);
    const ReviewOutcome o = board.await("r", id);
    EXPECT_EQ(o.decision, Decision::approved);
    EXPECT_EQ(o.actor, "web");
    EXPECT_FALSE(board.pending("r"));
}

TEST(DecisionBoard, ConcurrentResolversOneWins) {
    for (int round = 0; round < 20; ++round) {
        DecisionBoard board;
        board.publish({0, "r", 0, 0, "d", "c", "w", "t", "intent", {}});
        std::atomic<int> ok{0}, conflict{0};
        std::vector<std::thread> ts;
        for (int i = 0; i < 8; ++i)
            ts.emplace_back([&] {
                try {
                    board.resolve("r", {"approve"});
                    ++ok;
                } catch (const Conflict&) {
                    ++conflict;
                }
            });
        for (auto& t : ts) t.join();
        EXPECT_EQ(ok.load(), 1);
        EXPECT_EQ(conflict.load(), 7);
    }
}

TEST(WebReview, BlocksUntilResolved) {
    DecisionBoard board;
    WebReview gate(board, logical_clock());
    std::thread engine([&] {
        const ReviewOutcome o = gate.decide(request());
        EXPECT_EQ(o.decision, Decision::edited);
        EXPECT_EQ(o.edited_body, "human body");
    });
    const auto p = board.wait_pending("r", 2000ms);
    ASSERT_TRUE(p);
    EXPECT_EQ(p->changelog, "tighten");
    DecisionInput in{"edit", "rewrote"};
    in.edited_body = "human body";
    board.resolve("r", in);
    engine.join();
    EXPECT_FALSE(board.wait_pending("r", 10ms));
}
