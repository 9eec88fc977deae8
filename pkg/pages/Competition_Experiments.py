# pages/Competition_Experiments.py

import streamlit as st

from experiments import ExperimentSpec, GraphGenSpec, experiment_frame, run_experiment
from utils import summarize_experiment

st.set_page_config(
    page_title="Competition Experiments | Round-Robin Lab",
    layout="wide"
)

st.title("📡 Competing Influence Maximizers")
st.markdown("### n identical agents seed a social graph in turns; how much of the single-agent greedy value does each keep?")

with st.expander("🌐 Regimes and measurements"):
    st.markdown("""
    - **low:** Erdős–Rényi graphs, no standout vertex.
    - **medium:** power-law expected degrees (Lomax with shape 2), a few hubs.
    - **high:** Erdős–Rényi plus ten implanted influencers; influencer j reaches ⌈V/3^j⌉ vertices.

    Each agent's value is |S| plus the expected number of other vertices activated, each seed neighbour succeeding
    independently with probability q. The baseline is one greedy agent alone on the same graph with the same
    cardinality; the ratio column divides by it.
    """)


@st.cache_data(show_spinner=False)
def cached_experiment(spec_json: str):
    return experiment_frame(run_experiment(ExperimentSpec.model_validate_json(spec_json)))


# --- Controls ---
col1, col2, col3 = st.columns(3)
with col1:
    regime = st.selectbox("Competition regime", ["low", "medium", "high"], index=2)
    vertices = st.number_input("Vertices V", min_value=60, max_value=500, value=100, step=20)
with col2:
    sweep = st.selectbox("Sweep over", ["agents", "cardinality"])
    fixed = st.number_input("Fixed cardinality k" if sweep == "agents" else "Fixed agents n",
                            min_value=1, max_value=20, value=5 if sweep == "agents" else 2)
with col3:
    protocol = st.selectbox("Protocol", ["fixed", "randomized"])
    runs = st.number_input("Runs per point", min_value=1, max_value=50, value=5)

values = st.multiselect("Sweep values", list(range(1, 21)), default=[2, 3, 4, 5, 6])
spec = ExperimentSpec(
    graph=GraphGenSpec(vertices=int(vertices), avg_degree=10, regime=regime, seed=2024),
    agents=int(fixed) if sweep == "cardinality" else 2,
    cardinality=int(fixed) if sweep == "agents" else 5,
    runs=int(runs),
    sweep=sweep,
    values=sorted(values) or [2],
    protocol=protocol,
)

if not st.button("Run experiment", type="primary"):
    st.stop()

with st.spinner("Running protocol and baselines..."):
    frame = cached_experiment(spec.model_dump_json())

summary = summarize_experiment(frame)
st.header("1. Averages per turn position")
st.dataframe(summary, use_container_width=True, hide_index=True)

st.header("2. All rows")
st.dataframe(frame, use_container_width=True, hide_index=True)
st.download_button("Download CSV", frame.to_csv(index=False, lineterminator="\n"),
                   file_name=f"competition_{regime}_{sweep}.csv", mime="text/csv")
