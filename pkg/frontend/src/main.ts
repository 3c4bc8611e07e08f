import { ConsoleSession, GatewayClient, loadConfig } from './api.js';
import { AuditView } from './views/audit.js';
import { DashboardView } from './views/dashboard.js';
import { QueueView } from './views/queue.js';

type Tab = 'queue' | 'audit' | 'dashboard';

function defaultPeriod(): { start: string; end: string } {
  const now = new Date();
  const start = new Date(now);
  start.setUTCHours(0, 0, 0, 0);
  return { start: start.toISOString(), end: now.toISOString() };
}

async function boot(): Promise<void> {
  const app = document.getElementById('app')!;
  const config = await loadConfig();

  app.innerHTML = `
    <form id="login" class="login">
      <h1>Verifier console</h1>
      <p>Gateway: <code>${config.base_url || '(same origin)'}</code></p>
      <input id="api-key" type="password" placeholder="API key" autocomplete="off" />
      <button type="submit">Connect</button>
      <p class="hint">The key is held in memory only and never persisted.</p>
    </form>`;

  document.getElementById('login')!.addEventListener('submit', (event) => {
    event.preventDefault();
    const key = (document.getElementById('api-key') as HTMLInputElement).value.trim();
    if (!key) return;
    const session = new ConsoleSession(key, config.base_url, config.polling_interval_s);
    const client = new GatewayClient(session);
    mountShell(app, client, session);
  });
}

function mountShell(app: HTMLElement, client: GatewayClient, session: ConsoleSession): void {
  app.innerHTML = `
    <nav class="tabs">
      <button data-tab="queue" class="active">Review queue</button>
      <button data-tab="audit">Audit log</button>
      <button data-tab="dashboard">Reports</button>
    </nav>
    <main id="view"></main>`;
  const viewRoot = document.getElementById('view')!;

  const queue = new QueueView(viewRoot, client, session.pollingIntervalS);
  const audit = new AuditView(viewRoot, client);
  const dashboard = new DashboardView(viewRoot, client);

  let active: Tab = 'queue';
  const activate = (tab: Tab) => {
    if (active === 'queue') queue.stop();
    active = tab;
    app.querySelectorAll('nav.tabs button').forEach((b) => {
      b.classList.toggle('active', (b as HTMLElement).dataset.tab === tab);
    });
    viewRoot.innerHTML = '';
    if (tab === 'queue') queue.start();
    else if (tab === 'audit') void audit.refresh();
    else {
      const { start, end } = defaultPeriod();
      void dashboard.load(start, end);
    }
  };

  app.querySelectorAll<HTMLButtonElement>('nav.tabs button').forEach((button) => {
    button.addEventListener('click', () => activate(button.dataset.tab as Tab));
  });
  activate('queue');
}

void boot();
