// Plain-JS glue for the qsynth wasm demo: no framework, one wasm module,
// three operations. Build the module with:
//   wasm-pack build crates/qsynth-demo --target web --out-dir www/pkg
import init, { Demo } from "./pkg/qsynth_demo.js";

const $ = (id) => document.getElementById(id);
const status = (text) => { $("status").textContent = text; };

let demo = null;

const BRANCH_COLORS = [
  "#d9a23c", "#6fbf73", "#5f9bd9", "#d96c5f", "#b07fd9",
  "#5fd0c7", "#d9c75f", "#d95fa0", "#8bd95f", "#d9935f",
];

function sliderValues() {
  return {
    worldSeed: +$("worldSeed").value,
    roots: +$("roots").value,
    root: +($("rootSelect").value || 0),
    dmax: +$("dmax").value,
    k: +$("k").value,
    cap: +$("cap").value,
    lmax: +$("lmax").value,
    bcap: +$("bcap").value,
    iters: +$("iters").value,
  };
}

function rebuildWorld() {
  const v = sliderValues();
  demo = new Demo(v.worldSeed, v.roots, 4, 3);
  const roots = JSON.parse(demo.roots());
  const select = $("rootSelect");
  select.innerHTML = "";
  for (const r of roots) {
    const opt = document.createElement("option");
    opt.value = r.index;
    opt.textContent = `${r.name} (${r.domain})`;
    select.appendChild(opt);
  }
  status(`world ready: ${roots.length} seed entities`);
}

// ---------------------------------------------------------------------------
// tree rendering: simple tidy layout, one color per branch

function renderTree(tree) {
  const host = $("treeHost");
  if (!tree || !tree.nodes) {
    host.innerHTML = "<p class='legend'>No tree.</p>";
    return;
  }
  const byDepth = new Map();
  for (const n of tree.nodes) {
    if (!byDepth.has(n.depth)) byDepth.set(n.depth, []);
    byDepth.get(n.depth).push(n);
  }
  const levelH = 92;
  const width = Math.max(640, 150 * Math.max(...[...byDepth.values()].map(l => l.length)));
  const height = levelH * byDepth.size + 40;
  const pos = new Map();
  for (const [depth, level] of [...byDepth.entries()].sort((a, b) => a[0] - b[0])) {
    level.forEach((n, i) => {
      pos.set(n.id, {
        x: ((i + 1) * width) / (level.length + 1),
        y: 36 + depth * levelH,
      });
    });
  }
  const esc = (s) => s.replace(/&/g, "&amp;").replace(/</g, "&lt;");
  let svg = `<svg viewBox="0 0 ${width} ${height}" width="100%" height="${height}">`;
  for (const n of tree.nodes) {
    if (n.parent === null || n.parent === undefined) continue;
    const a = pos.get(n.parent), b = pos.get(n.id);
    const color = n.branch === null ? "#2c3441" : BRANCH_COLORS[n.branch % BRANCH_COLORS.length];
    svg += `<line x1="${a.x}" y1="${a.y + 14}" x2="${b.x}" y2="${b.y - 14}" stroke="${color}" stroke-width="2"/>`;
  }
  for (const n of tree.nodes) {
    const p = pos.get(n.id);
    const color = n.branch === null ? "#8b93a3" : BRANCH_COLORS[n.branch % BRANCH_COLORS.length];
    const label = n.depth === 0 ? tree.seed_entity : n.novel;
    svg += `<circle cx="${p.x}" cy="${p.y}" r="13" fill="#1a1f29" stroke="${color}" stroke-width="2.5">` +
           `<title>${esc(n.label)}</title></circle>`;
    svg += `<text x="${p.x}" y="${p.y + 28}" text-anchor="middle" fill="#e8e4d8" font-size="11">${esc(label)}</text>`;
  }
  svg += "</svg>";
  const branchLegend = tree.branches
    .map((b, i) => `<span class="tag info" style="border-color:${BRANCH_COLORS[i % BRANCH_COLORS.length]};color:${BRANCH_COLORS[i % BRANCH_COLORS.length]}">branch ${i + 1}: ${b.length} fact${b.length > 1 ? "s" : ""}</span>`)
    .join(" ");
  host.innerHTML = svg +
    `<p class="legend">${tree.nodes.length} nodes; hover a node for its fact. ` +
    `Disjoint DFS branches feed the escalation queue in order: ${branchLegend}</p>`;
}

// ---------------------------------------------------------------------------
// operations

function opTree() {
  const v = sliderValues();
  const tree = JSON.parse(demo.tree(v.root, v.dmax, v.k, v.worldSeed + 1));
  renderTree(tree);
  status("tree built");
}

function opTopdown() {
  const v = sliderValues();
  const out = JSON.parse(demo.topdown(v.root, v.dmax, v.k, v.lmax, v.cap, v.worldSeed + 1));
  if (out && out.tree) renderTree(out.tree);
  const host = $("topdownHost");
  if (!out || out.error) {
    host.innerHTML = `<p class="legend">error: ${out ? out.error : "no output"}</p>`;
    return;
  }
  let html = "";
  out.attempts.forEach((a, i) => {
    const solved = a.equivalent;
    html += `<div class="step">` +
      `<span class="tag ${solved ? "solved" : "failed"}">${solved ? "solved — escalate" : "solver failed"}</span>` +
      `<span class="meta">round ${i + 1}: solver answered <code>${a.answer || "(no answer)"}</code></span>` +
      `</div>`;
  });
  if (out.emitted) {
    html += `<div class="emitted"><strong>emitted after ${out.branches_consumed} branches, ${out.rounds} rounds</strong>` +
      `<div class="q">${out.question}</div>` +
      `<div class="meta">ground truth: <code>${out.answer}</code></div></div>`;
  } else {
    html += `<div class="none">no pair emitted — ${out.outcome}</div>`;
  }
  host.innerHTML = html;
  status(`top-down: ${out.outcome}`);
}

function opBottomup() {
  const v = sliderValues();
  const out = JSON.parse(demo.bottomup(v.root, v.iters, v.bcap, 6, v.worldSeed + 1));
  const host = $("bottomupHost");
  if (!out || out.error) {
    host.innerHTML = `<p class="legend">error: ${out ? out.error : "no output"}</p>`;
    return;
  }
  let html = `<div class="step"><span class="tag info">anchor</span>` +
    `<span class="q"><code>${out.anchor}</code></span> ` +
    `<span class="meta">popularity ${out.anchor_popularity.toFixed(2)} (rarest candidate wins)</span></div>`;
  for (const s of out.steps) {
    html += `<div class="step">` +
      `<span class="tag ${s.solved ? "solved" : "failed"}">${s.solved ? "solved — harden" : "solver lost"}</span>` +
      `<span class="meta">iteration ${s.iteration}, solver: <code>${s.solver_answer || "(no answer)"}</code></span>` +
      `<div class="q">${s.question}</div></div>`;
  }
  if (out.emitted) {
    html += `<div class="emitted"><strong>emitted at iteration ${out.steps.length}</strong>` +
      `<div class="q">${out.question}</div>` +
      `<div class="meta">ground truth stays the anchor: <code>${out.anchor}</code></div></div>`;
  } else {
    html += `<div class="none">no pair emitted — ${out.outcome}</div>`;
  }
  host.innerHTML = html;
  status(`bottom-up: ${out.outcome}`);
}

// ---------------------------------------------------------------------------
// wiring

function bindSliders() {
  for (const input of document.querySelectorAll("input[type=range]")) {
    const output = input.parentElement.querySelector("output");
    input.addEventListener("input", () => { output.textContent = input.value; });
  }
  $("worldSeed").addEventListener("change", rebuildWorld);
  $("roots").addEventListener("change", rebuildWorld);
  $("btnTree").addEventListener("click", opTree);
  $("btnTopdown").addEventListener("click", opTopdown);
  $("btnBottomup").addEventListener("click", opBottomup);
}

init().then(() => {
  bindSliders();
  rebuildWorld();
  opTree();
  opTopdown();
  opBottomup();
}).catch((e) => status(`wasm failed to load: ${e}`));
