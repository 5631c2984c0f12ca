import pytest
from hypothesis import given
from hypothesis import strategies as st

from maestro.blobs import BlobStore, sha256_hex
from maestro.errors import MissingVariable, SessionClosed, UnknownVariable
from maestro.model import (
    AgentKind,
    AgentProfile,
    Author,
    BlobRef,
    ChatMessage,
    ModalPayload,
    PayloadKind,
    PromptTemplate,
    Session,
    SessionStatus,
    append_message,
    render_template,
)

BLOB = BlobRef(digest="0" * 64, media_type="image/png", size=12)


def msg(author=Author.USER, text="hi", **kw):
    return ChatMessage(id="m", session_id="s", author=author,
                       payloads=(ModalPayload.from_text(text),), **kw)


class TestModalPayload:
    def test_text_payload_carries_no_blob(self):
        with pytest.raises(ValueError):
            ModalPayload(kind=PayloadKind.TEXT, text="x", blob=BLOB)
        with pytest.raises(ValueError):
            ModalPayload(kind=PayloadKind.TEXT, text=None)

    def test_media_payload_carries_exactly_one_blob(self):
        with pytest.raises(ValueError):
            ModalPayload(kind=PayloadKind.IMAGE, blob=None)
        with pytest.raises(ValueError):
            ModalPayload(kind=PayloadKind.IMAGE, blob=BLOB, text="caption")

    def test_constructors(self):
        t = ModalPayload.from_text("hello")
        assert t.kind is PayloadKind.TEXT and t.text == "hello"
        i = ModalPayload.from_blob(PayloadKind.IMAGE, BLOB)
        assert i.blob is BLOB and i.media_type == "image/png"


class TestAuthor:
    def test_tags(self):
        assert Author.worker("QA") == "worker:QA"
        assert Author.tool("search") == "tool:search"
        assert Author.is_worker("worker:QA") and not Author.is_worker("user")
        assert Author.name_of("worker:Senior Programmer") == "Senior Programmer"
        assert Author.name_of("user") == "user"

    def test_empty_names_rejected(self):
        with pytest.raises(ValueError):
            Author.worker("")
        with pytest.raises(ValueError):
            ChatMessage(id="m", session_id="s", author="worker:",
                        payloads=(ModalPayload.from_text("x"),))


class TestSession:
    def test_seq_starts_at_one_and_is_contiguous(self):
        s = Session(id="s1", workflow_id="wf")
        for i in range(1, 6):
            stored = append_message(s, msg(text=f"m{i}"))
            assert stored.seq == i
        assert [m.seq for m in s.messages] == [1, 2, 3, 4, 5]

    @given(st.lists(st.text(min_size=1, max_size=10), min_size=1, max_size=50))
    def test_seq_contiguity_property(self, texts):
        s = Session(id="s1", workflow_id="wf")
        for t in texts:
            append_message(s, msg(text=t))
        assert [m.seq for m in s.messages] == list(range(1, len(texts) + 1))

    def test_append_only(self):
        s = Session(id="s1", workflow_id="wf")
        first = append_message(s, msg(text="a"))
        append_message(s, msg(text="b"))
        assert s.messages[0] is first

    def test_closed_session_rejects_appends(self):
        s = Session(id="s1", workflow_id="wf", status=SessionStatus.CLOSED)
        with pytest.raises(SessionClosed):
            append_message(s, msg())

    def test_text_joins_text_payloads_only(self):
        m = ChatMessage(
            id="m", session_id="s", author=Author.USER,
            payloads=(
                ModalPayload.from_text("a"),
                ModalPayload.from_blob(PayloadKind.IMAGE, BLOB),
                ModalPayload.from_text("b"),
            ),
        )
        assert m.text() == "a\nb"


class TestTemplates:
    def test_declared_vars_are_derived(self):
        tpl = PromptTemplate("hi {name}, {name} again, also {other}")
        assert tpl.declared_vars == {"name", "other"}

    def test_malformed_braces_are_literal(self):
        tpl = PromptTemplate("{1bad} {-x} {ok_1}")
        assert tpl.declared_vars == {"ok_1"}
        assert render_template(tpl, {"ok_1": "v"}) == "{1bad} {-x} v"

    def test_missing_variable(self):
        with pytest.raises(MissingVariable):
            render_template(PromptTemplate("{a} {b}"), {"a": "1"})

    def test_unknown_variable_strict(self):
        with pytest.raises(UnknownVariable):
            render_template(PromptTemplate("{a}"), {"a": "1", "zzz": "2"})
        assert render_template(PromptTemplate("{a}"), {"a": "1", "zzz": "2"}, strict=False) == "1"

    def test_single_pass_substitution(self):
        # a value containing a placeholder form must survive verbatim
        tpl = PromptTemplate("{a} and {b}")
        assert render_template(tpl, {"a": "{b}", "b": "X"}) == "{b} and X"

    @given(
        st.dictionaries(
            st.from_regex(r"[a-z_][a-z0-9_]{0,5}", fullmatch=True),
            st.text(max_size=20),
            min_size=1,
            max_size=4,
        )
    )
    def test_render_resolves_every_placeholder_once(self, bindings):
        text = " ".join("{%s}" % k for k in bindings)
        out = render_template(PromptTemplate(text), bindings)
        assert out == " ".join(bindings[k] for k in bindings)


class TestAgentProfile:
    def test_supervisor_carries_no_tools(self):
        with pytest.raises(ValueError):
            AgentProfile(name="boss", kind=AgentKind.SUPERVISOR,
                         system_template=PromptTemplate("x"), tools=("hammer",))
        AgentProfile(name="w", kind=AgentKind.WORKER,
                     system_template=PromptTemplate("x"), tools=("hammer",))


class TestBlobStore:
    def test_known_digest(self):
        assert sha256_hex(b"") == (
            "e3b0c44298fc1c149afbf4c8996fb924"
            "27ae41e4649b934ca495991b7852b855"
        )

    def test_put_is_idempotent(self):
        store = BlobStore()
        d1 = store.put(b"abc", "text/plain")
        d2 = store.put(b"abc", "text/plain")
        assert d1 == d2 and len(store) == 1
        assert store.get(d1) == b"abc"

    @given(st.binary(min_size=1, max_size=200))
    def test_verify_detects_tamper(self, data):
        store = BlobStore()
        digest = store.put(data, "application/octet-stream")
        assert store.verify(digest)
        corrupted = bytes([data[0] ^ 0xFF]) + data[1:]
        store._blobs[digest] = corrupted
        assert not store.verify(digest)
