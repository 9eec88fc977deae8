# pages/Example_1_Explorer.py

import streamlit as st
import pandas as pd

from analysis import brute_force_opt
from core import allocation_of
from engine import GreedyPolicy, example1_instance, example1_strategic_policy, run_round_robin, trace_frame
from utils import allocation_frame

st.set_page_config(
    page_title="Example 1 Explorer | Round-Robin Lab",
    layout="wide"
)

st.title("🧩 Example 1 Explorer")
st.markdown("### Why a greedy agent can end with 2 out of 2n, and how one deviation recovers n + 1.")

with st.expander("🌐 The construction"):
    st.markdown("""
    There are n agents and m = n² + 1 items g_1, …, g_m. Agent 1 values g_1, …, g_2n at 1 each and nothing else.
    Every other agent i values its anchor g_(i−1) at 1+ε1, g_i at 1+ε2, a partner item g_(n+i) at 1+ε3 and every
    item beyond g_2n at 1+ε4, with a penalty of ε3 for holding both anchor and partner. Nobody has a real constraint.

    Ties go to the smallest item id. Under all-greedy play, each item agent 1 values is claimed by somebody else
    before agent 1 gets to it, except the two it takes in the first two rounds.
    """)

n = st.slider("Number of agents n", min_value=2, max_value=8, value=3)
instance = example1_instance(n)
f1 = instance.agents[0].objective

greedy_trace = run_round_robin(instance, [GreedyPolicy() for _ in range(n)])
strategic_trace = run_round_robin(instance, [example1_strategic_policy(n)] + [GreedyPolicy() for _ in range(n - 1)])

if n <= 4:
    opt_value, opt_set = brute_force_opt(f1, instance.agents[0].constraint, range(instance.m))
else:
    opt_value, opt_set = float(f1.singletons.sum()), tuple(range(2 * n))

col1, col2, col3 = st.columns(3)
col1.metric("Agent 1, all greedy", f"{f1.value(allocation_of(greedy_trace).bundles[0].chosen):g}")
col2.metric("Agent 1, strategic", f"{f1.value(allocation_of(strategic_trace).bundles[0].chosen):g}")
col3.metric("OPT for agent 1", f"{opt_value:g}", help="Brute force for n ≤ 4, closed form above.")

# --- Traces ---
st.header("1. Pick-by-pick traces")
left, right = st.columns(2)
with left:
    st.subheader("All agents greedy")
    st.dataframe(trace_frame(greedy_trace), use_container_width=True, hide_index=True)
    st.dataframe(allocation_frame(allocation_of(greedy_trace), instance), use_container_width=True, hide_index=True)
with right:
    st.subheader("Agent 1 opens with g_n")
    st.dataframe(trace_frame(strategic_trace), use_container_width=True, hide_index=True)
    st.dataframe(allocation_frame(allocation_of(strategic_trace), instance), use_container_width=True, hide_index=True)

# --- Valuations ---
st.header("2. Singleton values")
st.caption("Rows are agents, columns are item ids (g_j has id j − 1).")
values = pd.DataFrame([agent.objective.singletons for agent in instance.agents],
                      index=[f"agent {i + 1}" for i in range(n)])
st.dataframe(values.round(6), use_container_width=True)
