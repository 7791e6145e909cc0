/** Minimal JSON transport so tests can swap in a recorded server. */

export interface JsonResponse {
  status: number;
  body: unknown;
}

export interface HttpClient {
  get(path: string): Promise<JsonResponse>;
  post(path: string, body: unknown): Promise<JsonResponse>;
}

export function fetchClient(baseUrl: string): HttpClient {
  const url = (path: string) => `${baseUrl.replace(/\/$/, "")}${path}`;
  return {
    async get(path: string): Promise<JsonResponse> {
      const response = await fetch(url(path));
      return { status: response.status, body: await response.json() };
    },
    async post(path: string, body: unknown): Promise<JsonResponse> {
      const response = await fetch(url(path), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      });
      return { status: response.status, body: await response.json() };
    },
  };
}
