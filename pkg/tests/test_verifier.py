import random

import pytest

from fmgateway.errors import AlreadyDecided, Expired, UnknownTask
from fmgateway.verifier import (
    GATE_DELIVER,
    GATE_HOLD,
    GATE_REJECT,
    STATUS_APPROVED,
    STATUS_EDITED,
    STATUS_EXPIRED,
    STATUS_PENDING,
)

from conftest import Stack, make_policy


def gate(stack, text, policy, rid="r1", max_chars=4096):
    return stack.queue.gate(text, policy, rid, max_chars)


class TestGate:
    def test_automatic_delivers_without_tasks(self):
        stack = Stack()
        outcome = gate(stack, "candidate", make_policy(verifier_mode="automatic"))
        assert outcome.kind == GATE_DELIVER
        assert outcome.text == "candidate"
        assert stack.queue.tasks() == []

    def test_rule_blacklist_reject(self):
        stack = Stack()
        policy = make_policy(verifier_mode="rule", topic_blacklist=["bomb"])
        outcome = gate(stack, "a bomb recipe", policy)
        assert outcome.kind == GATE_REJECT
        assert outcome.reason == "blacklisted_term"

    def test_rule_whitelist_requirement(self):
        stack = Stack()
        policy = make_policy(verifier_mode="rule", topic_whitelist=["loan"])
        assert gate(stack, "nothing relevant", policy).reason == "off_topic"
        assert gate(stack, "loan summary", policy).kind == GATE_DELIVER

    def test_rule_length_violation(self):
        stack = Stack()
        policy = make_policy(verifier_mode="rule")
        outcome = gate(stack, "x" * 20, policy, max_chars=10)
        assert outcome.kind == GATE_REJECT
        assert outcome.reason == "format_violation"

    def test_human_mode_holds_with_pending_task(self):
        stack = Stack()
        policy = make_policy(verifier_mode="human")
        outcome = gate(stack, "candidate", policy, rid="r-h")
        assert outcome.kind == GATE_HOLD
        task = stack.queue.get_task(outcome.task_id)
        assert task.status == STATUS_PENDING
        assert task.request_id == "r-h"
        submitted = stack.events(kind="verifier_submitted", request_id="r-h")
        assert len(submitted) == 1


class TestHumanVerdict:
    def make_task(self, stack, policy=None, rid="r1"):
        policy = policy or make_policy(verifier_mode="human")
        return gate(stack, "candidate", policy, rid=rid).task_id

    def test_approve_sets_final_text_to_candidate(self):
        stack = Stack()
        task_id = self.make_task(stack)
        task = stack.queue.human_verdict(task_id, "approve", "alice")
        assert task.status == STATUS_APPROVED
        assert task.final_text == "candidate"
        assert task.verdict_by == "alice"

    def test_edit_requires_different_text(self):
        stack = Stack()
        task_id = self.make_task(stack)
        with pytest.raises(ValueError):
            stack.queue.human_verdict(task_id, "edit", "alice", new_text="candidate")
        task = stack.queue.human_verdict(task_id, "edit", "alice", new_text="better answer")
        assert task.status == STATUS_EDITED
        assert task.final_text == "better answer"

    def test_first_verdict_wins(self):
        stack = Stack()
        task_id = self.make_task(stack)
        stack.queue.human_verdict(task_id, "approve", "alice")
        with pytest.raises(AlreadyDecided):
            stack.queue.human_verdict(task_id, "reject", "bob")

    def test_unknown_task(self):
        with pytest.raises(UnknownTask):
            Stack().queue.human_verdict("vt-999999", "approve", "alice")

    def test_verdict_after_deadline_expires(self):
        stack = Stack()
        policy = make_policy(verifier_mode="human", human_verdict_timeout_s=60)
        task_id = gate(stack, "candidate", policy).task_id
        stack.clock.advance(61)
        with pytest.raises(Expired):
            stack.queue.human_verdict(task_id, "approve", "alice")
        assert stack.queue.get_task(task_id).status == STATUS_EXPIRED


class TestPollPending:
    def test_empty_queue(self):
        assert Stack().queue.poll_pending() == []

    def test_oldest_first(self):
        stack = Stack()
        policy = make_policy(verifier_mode="human")
        first = gate(stack, "one", policy, rid="r1").task_id
        stack.clock.advance(5)
        second = gate(stack, "two", policy, rid="r2").task_id
        pending = stack.queue.poll_pending()
        assert [t.task_id for t in pending] == [first, second]

    def test_poll_matches_scan_oracle(self):
        rng = random.Random(13)
        stack = Stack()
        policy = make_policy(verifier_mode="human", human_verdict_timeout_s=100)
        created = []
        for i in range(200):
            task_id = gate(stack, f"c{i}", policy, rid=f"r{i}").task_id
            created.append(task_id)
            if rng.random() < 0.3:
                stack.queue.human_verdict(task_id, rng.choice(["approve", "reject"]), "alice")
            stack.clock.advance(rng.randint(0, 3))
        now = stack.clock.now()
        tasks = {t.task_id: t for t in stack.queue.tasks()}
        expected = [tid for tid in created
                    if tasks[tid].status == STATUS_PENDING and now < tasks[tid].deadline]
        got = [t.task_id for t in stack.queue.poll_pending(limit=500)]
        assert got == expected

    def test_expire_due_transitions_overdue(self):
        stack = Stack()
        policy = make_policy(verifier_mode="human", human_verdict_timeout_s=10)
        task_id = gate(stack, "c", policy).task_id
        stack.clock.advance(11)
        expired = stack.queue.expire_due()
        assert [t.task_id for t in expired] == [task_id]
        assert stack.queue.get_task(task_id).status == STATUS_EXPIRED
        assert stack.queue.expire_due() == []
