/** Browser entry point: wires the socket client, camera, picking, rate
 * limiting, rendering, and the record/download controls to the DOM.
 *
 * All simulation changes go through wire messages; the page holds no
 * physics state of its own, so closing and reopening it never changes
 * simulation results.
 */
import { OrbitCamera } from "./camera.js";
import { TeleopClient, type ConnectionStatus } from "./client.js";
import { add, dot, scale, sub, type Vec3 } from "./math.js";
import { pickParticle } from "./picking.js";
import { DragLimiter } from "./rateLimit.js";
import { EpisodeRecorder } from "./recorder.js";
import { drawFrame, type ColorBy } from "./render.js";
import { IDENTITY_QUAT } from "./math.js";

type Tool = "orbit" | "grasp" | "drag";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const canvas = el<HTMLCanvasElement>("view");
  const ctx = canvas.getContext("2d")!;
  const statusBanner = el<HTMLDivElement>("status");
  const toast = el<HTMLDivElement>("toast");
  const logView = el<HTMLPreElement>("session-log");
  const metricsView = el<HTMLPreElement>("metrics");

  const params = new URLSearchParams(window.location.search);
  const role = params.get("role") === "observer" ? "observer" : "driver";
  const url =
    params.get("url") ?? `ws://${window.location.hostname}:8700/ws?role=${role}`;

  const camera = new OrbitCamera();
  const client = new TeleopClient(url, (u) => new WebSocket(u) as never);
  const recorder = new EpisodeRecorder(client);

  let tool: Tool = "orbit";
  let colorBy: ColorBy = "height";
  let pointSize = 4;
  let grasped = false;
  let dragLimiter: DragLimiter | null = null;
  let dragDepth = 0;
  let stepTimer: number | null = null;

  const isDriver = () => client.role === "driver";

  function showToast(text: string): void {
    toast.textContent = text;
    toast.classList.add("visible");
    setTimeout(() => toast.classList.remove("visible"), 1800);
  }

  function render(): void {
    if (client.latestFrame) {
      drawFrame(ctx, client.latestFrame, camera, { pointSize, colorBy });
    }
    requestAnimationFrame(render);
  }

  function refreshControls(): void {
    el<HTMLButtonElement>("record-start").disabled = !isDriver() || !recorder.canStart;
    el<HTMLButtonElement>("record-stop").disabled = !isDriver() || !recorder.canStop;
    el<HTMLButtonElement>("download").disabled = !recorder.canDownload;
    for (const t of ["orbit", "grasp", "drag"] as Tool[]) {
      const button = el<HTMLButtonElement>(`tool-${t}`);
      button.classList.toggle("active", tool === t);
      if (t !== "orbit") button.disabled = !isDriver();
    }
  }

  client.onStatus = (status: ConnectionStatus) => {
    statusBanner.textContent =
      status === "connected"
        ? `connected (${client.role ?? "?"})`
        : status;
    statusBanner.className = `status ${status}`;
    if (status === "connected") {
      void client.request({ type: "subscribe_state", stride: 2 });
    }
    refreshControls();
  };

  client.onFrame = () => {
    logView.textContent = client.log
      .slice(-12)
      .map((entry) => `${entry.direction === "sent" ? ">" : "<"} ${JSON.stringify(entry.message)}`)
      .join("\n");
  };

  // -- mouse interaction ----------------------------------------------------

  let lastMouse: { x: number; y: number } | null = null;

  canvas.addEventListener("mousedown", (event) => {
    const rect = canvas.getBoundingClientRect();
    const x = event.clientX - rect.left;
    const y = event.clientY - rect.top;
    lastMouse = { x, y };
    if (tool === "grasp" && isDriver()) {
      const hit = pickParticle(client.points(), camera, x, y, canvas.width, canvas.height);
      if (!hit) {
        showToast("no particle");
        return;
      }
      void client.request({ type: "grasp", point: hit.point, effector: 0 }).then((response) => {
        if (response.ok) {
          grasped = true;
          const caps = client.caps!;
          dragLimiter = new DragLimiter(
            { position: hit.point, quaternion: IDENTITY_QUAT },
            caps,
          );
          const rel = sub(hit.point, camera.position);
          dragDepth = dot(rel, camera.basis().forward);
          startStepping();
        } else {
          showToast(response.error.code);
        }
      });
    }
  });

  canvas.addEventListener("mousemove", (event) => {
    if (!lastMouse) return;
    const rect = canvas.getBoundingClientRect();
    const x = event.clientX - rect.left;
    const y = event.clientY - rect.top;
    const dx = x - lastMouse.x;
    const dy = y - lastMouse.y;
    if (tool === "orbit" || !isDriver()) {
      camera.orbit(-dx * 0.01, dy * 0.01);
    } else if ((tool === "drag" || tool === "grasp") && grasped && dragLimiter) {
      // move the effector in the camera plane at the grasp depth
      const ray = camera.rayThrough(x, y, canvas.width, canvas.height);
      const denom = dot(ray.direction, camera.basis().forward);
      if (denom > 1e-6) {
        const target = add(ray.origin, scale(ray.direction, dragDepth / denom)) as Vec3;
        const limited = dragLimiter.next({ position: target, quaternion: IDENTITY_QUAT });
        void client.request({
          type: "move_effector",
          position: limited.position,
          effector: 0,
        });
      }
    }
    lastMouse = { x, y };
  });

  window.addEventListener("mouseup", () => {
    lastMouse = null;
  });

  canvas.addEventListener("wheel", (event) => {
    event.preventDefault();
    camera.zoom(event.deltaY > 0 ? 1.1 : 0.9);
  });

  window.addEventListener("keyup", (event) => {
    if (event.key === "r" && grasped && isDriver()) {
      void client.request({ type: "release", effector: 0 });
      grasped = false;
      dragLimiter = null;
      stopStepping();
    }
  });

  // -- continuous stepping while driving -----------------------------------

  function startStepping(): void {
    if (stepTimer !== null) return;
    stepTimer = window.setInterval(() => {
      void client.request({ type: "step", n: 1 });
    }, 1000 / 30);
  }

  function stopStepping(): void {
    if (stepTimer !== null) {
      clearInterval(stepTimer);
      stepTimer = null;
    }
  }

  // -- toolbar -------------------------------------------------------------

  for (const t of ["orbit", "grasp", "drag"] as Tool[]) {
    el<HTMLButtonElement>(`tool-${t}`).addEventListener("click", () => {
      tool = t;
      refreshControls();
    });
  }
  el<HTMLSelectElement>("color-by").addEventListener("change", (event) => {
    colorBy = (event.target as HTMLSelectElement).value as ColorBy;
  });
  el<HTMLInputElement>("point-size").addEventListener("input", (event) => {
    pointSize = Number((event.target as HTMLInputElement).value);
  });
  el<HTMLButtonElement>("step-once").addEventListener("click", () => {
    void client.request({ type: "step", n: 1 });
  });
  el<HTMLButtonElement>("reset").addEventListener("click", () => {
    void client.request({ type: "reset" });
  });

  el<HTMLButtonElement>("record-start").addEventListener("click", () => {
    void recorder.start().then(refreshControls);
  });
  el<HTMLButtonElement>("record-stop").addEventListener("click", () => {
    void recorder.stop().then(refreshControls);
  });
  el<HTMLButtonElement>("download").addEventListener("click", () => {
    const payload = recorder.downloadPayload();
    if (!payload) return;
    const blob = new Blob([payload], { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "episode.json";
    link.click();
    URL.revokeObjectURL(link.href);
  });

  // metrics panel polls at 2 Hz instead of subscribing
  setInterval(() => {
    if (client.status !== "connected") return;
    void client.request({ type: "get_metrics" }).then((response) => {
      if (response.ok) {
        metricsView.textContent = JSON.stringify(response["metrics"], null, 1);
      }
    });
  }, 500);

  client.connect();
  refreshControls();
  render();
}

main();
