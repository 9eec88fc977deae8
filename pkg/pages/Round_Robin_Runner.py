# pages/Round_Robin_Runner.py

import json
from pathlib import Path

import streamlit as st

from analysis import THEOREMS, exante_bound_check, fairness_report, verify_run
from core import RoundRobinError, allocation_of, instance_from_dict
from engine import ProtocolConfig, default_policies, policy_from_dict, run_round_robin, trace_frame
from utils import agent_summary_frame, allocation_frame, exante_frame, fairness_frame, verification_frame

SAMPLES = Path(__file__).resolve().parent.parent / "instances"

st.set_page_config(
    page_title="Round Robin Runner | Round-Robin Lab",
    layout="wide"
)

st.title("⚖️ Round Robin Runner & Verifier")
st.markdown("### Run an instance, then recompute OPT, OPT⁻ and every applicable guarantee independently.")

with st.expander("🌐 How verification works"):
    st.markdown("""
    - **OPT** is the best feasible set for the agent over all items; **OPT⁻** the best over items still available when
      the agent first moves. Both are exact, found by enumerating independent sets.
    - Each per-run bound compares the agent's final value against a fraction of OPT⁻; margins below 1 are failures.
    - The fairness matrix shows, for every ordered pair (i, j), how much agent i's value covers its best feasible
      subset of j's bundle after removing one item (FEF1), the same with feasibility ignored (EF1), and the
      first-pick form where j's first item is removed only when j moved before i.
    """)

# --- 1. Instance ---
st.header("1. Instance")
source = st.radio("Source", ["Bundled sample", "Upload JSON"], horizontal=True)
document = None
if source == "Bundled sample":
    sample = st.selectbox("Sample", sorted(p.name for p in SAMPLES.glob("*.json")))
    document = json.loads((SAMPLES / sample).read_text(encoding="utf-8"))
else:
    upload = st.file_uploader("Instance file", type="json")
    if upload is not None:
        document = json.loads(upload.getvalue().decode("utf-8"))

if document is None:
    st.info("Upload an instance file to continue.")
    st.stop()

try:
    instance = instance_from_dict(document)
except RoundRobinError as exc:
    st.error(f"Instance rejected: {exc}")
    st.stop()

st.caption(f"n = {instance.n} agents, m = {instance.m} items")

# --- 2. Protocol ---
st.header("2. Protocol")
col1, col2, col3 = st.columns(3)
with col1:
    randomized = st.toggle("Randomize agent order")
with col2:
    seed = st.number_input("Seed", min_value=0, value=2024, step=1, disabled=not randomized)
with col3:
    rule = st.selectbox("Negative marginals (simultaneous greedy)", ["as_written", "skip_nonpositive"])

kinds = []
for agent, default in enumerate(default_policies(instance)):
    kinds.append(st.selectbox(f"Policy of agent {agent}", ["greedy", "simultaneous_greedy"],
                              index=0 if default.kind == "greedy" else 1, key=f"policy-{agent}"))
theorems = st.multiselect("Theorems to check", list(THEOREMS[:6]), default=list(THEOREMS[:6]))

config = ProtocolConfig(seed=int(seed) if randomized else None, negative_marginal_rule=rule)
try:
    policies = [policy_from_dict(kind) for kind in kinds]
    trace = run_round_robin(instance, policies, config)
    report = verify_run(trace, theorems)
except RoundRobinError as exc:
    st.error(f"Run aborted: {exc}")
    st.stop()

allocation = allocation_of(trace)

# --- 3. Results ---
st.header("3. Allocation")
st.caption(f"Agent order: {list(trace.permutation)}; value queries per agent: {list(trace.queries)}")
st.dataframe(allocation_frame(allocation, instance), use_container_width=True, hide_index=True)
with st.expander("Trace"):
    st.dataframe(trace_frame(trace), use_container_width=True, hide_index=True)

st.header("4. Guarantees")
kpi1, kpi2, kpi3 = st.columns(3)
kpi1.metric("Checks", len(report.checks))
kpi2.metric("Failed", sum(not c.passed for c in report.checks))
if report.saturation is not None:
    kpi3.metric("Saturated", "yes" if report.saturation.passed else "no")
st.dataframe(agent_summary_frame(report), use_container_width=True, hide_index=True)
st.dataframe(verification_frame(report), use_container_width=True, hide_index=True)

st.header("5. Fairness")
fairness = fairness_report(allocation, instance)
st.dataframe(fairness_frame(fairness), use_container_width=True, hide_index=True)

if instance.n <= 6 and st.checkbox("Compute the exact ex-ante guarantee over all agent orders"):
    st.dataframe(exante_frame(exante_bound_check(instance, policies)), use_container_width=True, hide_index=True)
